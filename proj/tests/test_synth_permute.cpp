#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>

#include "plateforge/synth_permute.hpp"

using namespace plateforge;
namespace fs = std::filesystem;

namespace {

CharBox cb(double x, double y, double w, double h, char c) { return {{x, y, w, h}, c}; }

// A 7-slot plate with 30x40 patches at a 40 px pitch and distinct textures per slot.
std::pair<Image, LpAnnotation> striped_plate(const std::string& text) {
  Image img(300, 60, 3, 0);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      set_rgb(img, x, y, {static_cast<std::uint8_t>(x), static_cast<std::uint8_t>(y * 3), static_cast<std::uint8_t>(x ^ y)});
  LpAnnotation ann;
  ann.dataset_id = "ds";
  ann.image_id = "p0";
  ann.layout = LayoutClass::brazilian();
  ann.corners = axis_aligned_quad(0.0, 0.0, 299.0, 59.0);
  ann.text = text;
  std::vector<CharBox> boxes;
  for (std::size_t i = 0; i < text.size(); ++i) boxes.push_back(cb(10 + 40.0 * i, 10, 30, 40, text[i]));
  ann.char_boxes = boxes;
  ann.image_size = std::pair{300, 60};
  return {img, ann};
}

std::string pattern(const std::string& s) {
  std::string p;
  for (char c : s) p.push_back(is_digit(c) ? 'D' : 'L');
  return p;
}

bool inside_any(const std::vector<CharBox>& boxes, int x, int y) {
  for (const auto& b : boxes)
    if (x >= b.box.x && x < b.box.right() && y >= b.box.y && y < b.box.bottom()) return true;
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("equalize grows every box to the largest size about its center") {
  const std::vector<CharBox> in{cb(0, 5, 10, 20, 'A'), cb(30, 5, 12, 20, 'B'), cb(60, 5, 14, 20, 'C')};
  const auto out = equalize_boxes(in, std::nullopt);
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out[i].box.w == 14);
    CHECK(out[i].box.h == 20);
    CHECK(out[i].cls == in[i].cls);
    CHECK(out[i].box.center().x() == doctest::Approx(in[i].box.center().x()));
    CHECK(out[i].box.center().y() == doctest::Approx(in[i].box.center().y()));
  }
}

TEST_CASE("equalize leaves uniform boxes alone") {
  const std::vector<CharBox> in{cb(2, 3, 10, 20, 'A'), cb(20, 3, 10, 20, '7')};
  const auto out = equalize_boxes(in, BBoxd{0, 0, 40, 30});
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(out[i].box == in[i].box);
}

TEST_CASE("equalize shifts a thin patch inward rather than cropping it") {
  const std::vector<CharBox> in{cb(0, 4, 4, 20, '1'), cb(20, 4, 12, 20, 'M')};
  const auto out = equalize_boxes(in, BBoxd{0, 0, 100, 30});
  CHECK(out[0].box == BBoxd{0, 4, 12, 20});
  CHECK(out[1].box == BBoxd{20, 4, 12, 20});
  CHECK_THROWS_AS((void)equalize_boxes({cb(0, 0, 12, 5, 'A')}, BBoxd{0, 0, 10, 10}), Error);
}

TEST_CASE("feasibility is judged after equalization") {
  CHECK(check_feasible({cb(0, 0, 10, 10, 'A'), cb(12, 0, 10, 10, 'B')}));
  CHECK_FALSE(check_feasible({cb(0, 0, 10, 10, 'A'), cb(5, 0, 10, 10, 'B')}));
  // Widths 8 and 20 with a 5 px gap: disjoint as given, overlapping at width 20.
  const std::vector<CharBox> tight{cb(0, 0, 8, 10, 'A'), cb(13, 0, 20, 10, 'B')};
  CHECK(intersection_area(tight[0].box, tight[1].box) == 0.0);
  CHECK_FALSE(check_feasible(tight));
  CHECK_FALSE(check_feasible({cb(0, 0, 12, 5, 'A')}, BBoxd{0, 0, 10, 10}));
}

TEST_CASE("same-kind plans keep the letter/digit pattern") {
  const auto [img, ann] = striped_plate("ABC1234");
  PermutationPolicy policy;
  policy.max_variants = 6;
  BalanceState counts;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto plans = plan_permutations(ann, policy, counts, seed);
    CHECK_FALSE(plans.empty());
    CHECK(plans.size() <= 6);
    for (const auto& p : plans) {
      CHECK(pattern(p.new_text) == "LLLDDDD");
      CHECK(p.new_text != ann.text);
      CHECK(p.source_id == "ds/p0");
      for (std::size_t i = 0; i < 7; ++i) CHECK(p.new_text[i] == ann.text[p.slot_map[i]]);
    }
    for (std::size_t i = 0; i < plans.size(); ++i)
      for (std::size_t j = i + 1; j < plans.size(); ++j) CHECK(plans[i].new_text != plans[j].new_text);
  }
}

TEST_CASE("a single available letter repeats in every letter slot") {
  const auto [img, ann] = striped_plate("AAA1234");
  BalanceState counts;
  for (const auto& p : plan_permutations(ann, PermutationPolicy{}, counts, 4)) CHECK(p.new_text.substr(0, 3) == "AAA");
}

TEST_CASE("plans are deterministic and favour underrepresented classes") {
  const auto [img, ann] = striped_plate("ABC1234");
  BalanceState counts;
  for (int k = 0; k < 10; ++k) {
    counts.increment(ann.layout, 0, 'A');
    counts.increment(ann.layout, 0, 'B');
  }
  const auto a = plan_permutations(ann, PermutationPolicy{}, counts, 99);
  const auto b = plan_permutations(ann, PermutationPolicy{}, counts, 99);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].new_text == b[i].new_text);
    CHECK(a[i].slot_map == b[i].slot_map);
  }
  REQUIRE_FALSE(a.empty());
  CHECK(a[0].new_text[0] == 'C');

  PermutationPolicy cross;
  cross.mode = PermutationMode::CrossKind;
  for (int k = 0; k < 10; ++k) counts.increment(ann.layout, 0, 'C');
  const auto c = plan_permutations(ann, cross, counts, 99);
  REQUIRE_FALSE(c.empty());
  CHECK(is_digit(c[0].new_text[0]));
}

TEST_CASE("balance targets and repeat caps") {
  const auto [img, ann] = striped_plate("ABC1234");
  PermutationPolicy policy;
  policy.balance_target = {{'A', 0.1}};
  BalanceState counts;
  counts.increment(ann.layout, 0, 'A');
  for (int k = 0; k < 2; ++k) counts.increment(ann.layout, 0, 'B');
  for (int k = 0; k < 3; ++k) counts.increment(ann.layout, 0, 'C');
  const auto plans = plan_permutations(ann, policy, counts, 1);
  REQUIRE_FALSE(plans.empty());
  CHECK(plans[0].new_text[0] == 'B');

  policy = {};
  policy.repeat_cap = 1;
  for (const auto& p : plan_permutations(ann, policy, BalanceState{}, 3)) {
    std::string sorted = p.new_text, orig = ann.text;
    std::sort(sorted.begin(), sorted.end());
    std::sort(orig.begin(), orig.end());
    CHECK(sorted == orig);
  }
  policy.max_variants = 0;
  CHECK_THROWS_AS(policy.validate(), Error);
}

TEST_CASE("planning errors") {
  auto [img, ann] = striped_plate("ABC1234");
  ann.char_boxes.reset();
  try {
    (void)plan_permutations(ann, PermutationPolicy{}, BalanceState{}, 0);
    FAIL("expected MissingCharBoxes");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingCharBoxes);
  }
  ann = striped_plate("ABC1234").second;
  (*ann.char_boxes)[1].box.x = 25;
  try {
    (void)plan_permutations(ann, PermutationPolicy{}, BalanceState{}, 0);
    FAIL("expected Infeasible");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Infeasible);
  }
}

TEST_CASE("identity plan leaves the image unchanged") {
  const auto [img, ann] = striped_plate("ABC1234");
  const PermutationPlan plan{"ds/p0", "ABC1234", {0, 1, 2, 3, 4, 5, 6}};
  const auto out = apply_permutation(img, ann, plan);
  CHECK(out.image == img);
  CHECK(out.annotation.text == "ABC1234");
}

TEST_CASE("swapping two patches exchanges their pixels exactly") {
  const auto [img, ann] = striped_plate("ABC1234");
  const PermutationPlan plan{"ds/p0", "CBA1234", {2, 1, 0, 3, 4, 5, 6}};
  const auto out = apply_permutation(img, ann, plan);
  const auto& b0 = (*ann.char_boxes)[0].box;
  const auto& b2 = (*ann.char_boxes)[2].box;
  for (int dy = 0; dy < 40; ++dy)
    for (int dx = 0; dx < 30; ++dx) {
      const int x0 = static_cast<int>(b0.x) + dx, x2 = static_cast<int>(b2.x) + dx, y = static_cast<int>(b0.y) + dy;
      CHECK(get_rgb(out.image, x0, y) == get_rgb(img, x2, y));
      CHECK(get_rgb(out.image, x2, y) == get_rgb(img, x0, y));
    }
  CHECK(out.annotation.text == "CBA1234");
  CHECK((*out.annotation.char_boxes)[0].cls == 'C');
}

TEST_CASE("pixels outside the equalized boxes never change") {
  auto [img, ann] = striped_plate("ABC1234");
  (*ann.char_boxes)[3].box.w = 22;  // forces equalization growth
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (const auto& plan : plan_permutations(ann, PermutationPolicy{}, BalanceState{}, seed)) {
      const auto out = apply_permutation(img, ann, plan);
      const auto& eq = *out.annotation.char_boxes;
      long changed_outside = 0;
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
          if (!inside_any(eq, x, y) && !(get_rgb(out.image, x, y) == get_rgb(img, x, y))) ++changed_outside;
      CHECK(changed_outside == 0);
    }
}

TEST_CASE("apply_permutation rejects inconsistent plans") {
  const auto [img, ann] = striped_plate("ABC1234");
  auto expect_mismatch = [&](const Image& im, const PermutationPlan& p) {
    try {
      (void)apply_permutation(im, ann, p);
      FAIL("expected GeometryMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::GeometryMismatch);
    }
  };
  expect_mismatch(img, {"ds/other", "ABC1234", {0, 1, 2, 3, 4, 5, 6}});
  expect_mismatch(img, {"ds/p0", "ABC123", {0, 1, 2, 3, 4, 5}});
  expect_mismatch(img, {"ds/p0", "ABC1234", {0, 1, 2, 3, 4, 5, 9}});
  expect_mismatch(img, {"ds/p0", "BBC1234", {0, 1, 2, 3, 4, 5, 6}});
  expect_mismatch(Image(200, 60, 3, 0), {"ds/p0", "ABC1234", {0, 1, 2, 3, 4, 5, 6}});
}

TEST_CASE("permuted corpus generation") {
  const auto dir = fs::temp_directory_path() / "plateforge_perm_test";
  fs::remove_all(dir);
  TemplateCorpusOptions topt;
  topt.total = 12;
  topt.augmentation = AugmentationConfig::identity(21);
  const auto sources = generate_template_corpus(builtin_layout_specs(), builtin_glyph_atlas(), topt, dir / "src");
  const auto src_manifest = dir / "src" / "manifest.jsonl";

  PermutationPolicy policy;
  policy.max_variants = 8;
  PermutedCorpusOptions opt;
  opt.total = 60;
  opt.seed = 5;
  const auto m = generate_permuted_corpus(sources, src_manifest, policy, opt, dir / "a");
  REQUIRE(m.entries.size() == 60);
  std::map<std::string, int> per_layout;
  for (const auto& e : m.entries) {
    ++per_layout[e.annotation.layout.name()];
    CHECK(e.source == Source::Permuted);
    CHECK(e.split == Split::Train);
  }
  CHECK(per_layout.size() == 6);
  for (const auto& [l, n] : per_layout) CHECK(n == 10);

  // Every output differs from some same-layout source only inside its boxes.
  for (const auto& e : m.entries) {
    const Image out = read_png(dir / "a" / *e.annotation.image_path);
    bool matched = false;
    for (const auto& s : sources.entries) {
      if (s.annotation.layout != e.annotation.layout) continue;
      const Image src = read_png(dir / "src" / *s.annotation.image_path);
      bool same = true;
      for (int y = 0; y < src.height() && same; ++y)
        for (int x = 0; x < src.width() && same; ++x)
          if (!inside_any(*e.annotation.char_boxes, x, y)) same = get_rgb(out, x, y) == get_rgb(src, x, y);
      matched |= same;
    }
    CHECK(matched);
  }

  opt.workers = 3;
  (void)generate_permuted_corpus(sources, src_manifest, policy, opt, dir / "b");
  CHECK(slurp(dir / "a" / "manifest.jsonl") == slurp(dir / "b" / "manifest.jsonl"));

  CorpusManifest broken = sources;
  for (auto& e : broken.entries) (*e.annotation.char_boxes)[1] = (*e.annotation.char_boxes)[0];
  try {
    (void)generate_permuted_corpus(broken, src_manifest, policy, opt, dir / "c");
    FAIL("expected InsufficientFeasibleSources");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InsufficientFeasibleSources);
  }
}

TEST_CASE("policy JSON round trip and validation") {
  PermutationPolicy p;
  p.mode = PermutationMode::CrossKind;
  p.max_variants = 6;
  p.repeat_cap = 2;
  p.balance_target = {{'A', 2.0}, {'7', 0.5}};
  const auto back = permutation_policy_from_json(to_json(p));
  CHECK(back.mode == p.mode);
  CHECK(back.max_variants == 6);
  CHECK(back.repeat_cap == 2);
  CHECK(back.balance_target == p.balance_target);
  CHECK(permutation_policy_from_json(nlohmann::json::object()).mode == PermutationMode::SameKind);
  CHECK_THROWS_AS((void)permutation_policy_from_json({{"balance_target", {{"AB", 1.0}}}}), Error);
  CHECK_THROWS_AS((void)permutation_policy_from_json({{"max_variants", 0}}), Error);
  CHECK_THROWS_AS((void)permutation_policy_from_json({{"mode", "sideways"}}), Error);
}
