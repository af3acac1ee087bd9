// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "harness_fixtures.hpp"
#include "plateforge/ganprep.hpp"
#include "plateforge/geometry.hpp"
#include "plateforge/harness.hpp"
#include "plateforge/metrics.hpp"
#include "plateforge/rng.hpp"
#include "plateforge/synth_permute.hpp"
#include "plateforge/synth_template.hpp"
#include "support.hpp"

using namespace plateforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kNmeTol = 1e-9;
constexpr double kResidualTol = 1e-6;
constexpr double kWarpMaeTol = 3.0;
constexpr double kIouTol = 1e-3;
constexpr double kMaskBoxTol = 1.0;

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail = what;
      pass = false;
    }
  }
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "plateforge_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(double v, int decimals = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// ---- 1 ----------------------------------------------------------------------

Outcome table_averages() {
  Outcome o;
  const auto dir = work_dir() / "c1";
  fs::create_directories(dir);
  struct Count {
    const char* ds;
    std::size_t correct, total;
  };
  const std::vector<Count> intra{{"caltech-cars", 45, 46}, {"englishlp", 101, 102}, {"ucsd-stills", 59, 60},
                                 {"chineselp", 159, 161},  {"aolp", 679, 687},      {"ssig-segplate", 798, 804},
                                 {"ufpr-alpr", 1692, 1800}, {"rodosol-alpr", 7784, 8000}};
  const std::vector<Count> cross{{"openalpr-eu", 107, 108}, {"pku", 2239, 2253}, {"cd-hard", 80, 104}, {"clpd", 1154, 1200}};
  CorpusManifest m;
  PredictionRun run{"TRBA", {}};
  for (const auto& c : intra) {
    testing::add_test_plates(m, c.ds, c.total, true);
    testing::add_predictions(run, c.ds, c.total, c.correct);
  }
  for (const auto& c : cross) {
    testing::add_test_plates(m, c.ds, c.total, false);
    testing::add_predictions(run, c.ds, c.total, c.correct);
  }
  save_manifest(dir / "gt.jsonl", m);
  save_prediction_runs(dir / "preds.jsonl", {run});

  auto average_cell = [&](const char* kind, const std::vector<Count>& cols) {
    json cfg{{"kind", kind}, {"manifests", {"gt.jsonl"}}, {"predictions", {"preds.jsonl"}}};
    for (const auto& c : cols) cfg["datasets"].push_back(c.ds);
    const auto rep = run_eval(experiment_config_from_json(cfg, dir));
    const auto csv = render_report(rep, ReportFormat::Csv);
    const auto row = csv.substr(csv.find('\n') + 1);
    return row.substr(row.rfind(',') + 1, row.size() - row.rfind(',') - 2);
  };
  const auto a4 = average_cell("intra", intra);
  const auto a6 = average_cell("cross", cross);
  o.require(a4 == "97.9", "intra average " + a4);
  o.require(a6 == "92.9", "cross average " + a6);
  o.detail = o.pass ? "intra " + a4 + ", cross " + a6 : o.detail;
  return o;
}

// ---- 2 ----------------------------------------------------------------------

// Normalized mean corner error written out over plain doubles.
double nme_oracle(const double g[8], const double p[8]) {
  double xmin = g[0], xmax = g[0], ymin = g[1], ymax = g[1];
  for (int i = 1; i < 4; ++i) {
    xmin = std::min(xmin, g[2 * i]);
    xmax = std::max(xmax, g[2 * i]);
    ymin = std::min(ymin, g[2 * i + 1]);
    ymax = std::max(ymax, g[2 * i + 1]);
  }
  const double diag = std::sqrt((xmax - xmin) * (xmax - xmin) + (ymax - ymin) * (ymax - ymin));
  double sum = 0;
  for (int i = 0; i < 4; ++i) {
    const double dx = g[2 * i] - p[2 * i], dy = g[2 * i + 1] - p[2 * i + 1];
    sum += std::sqrt(dx * dx + dy * dy);
  }
  return sum / 4.0 / diag;
}

Outcome nme_oracle_suite() {
  Outcome o;
  Rng rng(2024);
  double worst = 0;
  for (int n = 0; n < 1000; ++n) {
    const Quadd g = testing::random_quad(rng), p = testing::random_quad(rng);
    const auto ga = g.to_array(), pa = p.to_array();
    worst = std::max(worst, std::abs(lp_nme(g, p) - nme_oracle(ga.data(), pa.data())));
  }
  o.require(worst < kNmeTol, "max deviation " + std::to_string(worst));
  const Quadd gt = axis_aligned_quad(0.0, 0.0, 30.0, 40.0);
  Quadd shifted = gt;
  for (int i = 0; i < 4; ++i) shifted[i] += Point2d(3, 4);
  const double hand = lp_nme(gt, shifted);
  o.require(hand == 0.1, "hand case " + fmt(hand, 17));
  if (o.pass) o.detail = "max |diff| " + fmt(worst, 17) + ", hand case " + fmt(hand, 1);
  return o;
}

// ---- 3 ----------------------------------------------------------------------

Outcome geometry_suite() {
  Outcome o;
  Rng rng(77);
  double worst = 0;
  for (int n = 0; n < 100; ++n) {
    const Quadd a = testing::random_quad(rng), b = testing::random_quad(rng);
    const Homographyd h = homography_from_quads(a, b);
    for (int i = 0; i < 4; ++i) worst = std::max(worst, (h.apply(a[i]) - b[i]).norm());
  }
  o.require(worst < kResidualTol, "corner residual " + std::to_string(worst));

  const double mae = testing::warp_roundtrip_mae(testing::checkerboard(256, 256, 32));
  o.require(mae < kWarpMaeTol, "warp round-trip MAE " + fmt(mae));

  int idempotent = 0, tried = 0;
  std::string example;
  for (int n = 0; n < 100; ++n) {
    const Quadd q = testing::random_quad(rng);
    const RectifiedFrame f = rect_target_frame(q);
    const RectifiedFrame again = rect_target_frame(f.target);
    ++tried;
    if (again.width == f.width && again.height == f.height)
      ++idempotent;
    else if (example.empty())
      example = std::to_string(f.width) + "x" + std::to_string(f.height) + " -> " + std::to_string(again.width) + "x" +
                std::to_string(again.height);
  }
  o.require(idempotent == tried, "rect_target_frame idempotent on " + std::to_string(idempotent) + "/" +
                                     std::to_string(tried) + " frames (e.g. " + example + ")");
  const std::string summary = "residual " + fmt(worst, 12) + " px, warp MAE " + fmt(mae) + ", idempotent " +
                              std::to_string(idempotent) + "/" + std::to_string(tried);
  o.detail = o.pass ? summary : o.detail + "; " + summary;
  return o;
}

// ---- 4 ----------------------------------------------------------------------

Outcome iou_suite() {
  Outcome o;
  Rng rng(404);
  double worst = 0;
  for (int n = 0; n < 500; ++n) {
    const BBoxd a = testing::random_int_box(rng, 60), b = testing::random_int_box(rng, 60);
    worst = std::max(worst, std::abs(iou(a, b) - testing::pixel_iou(a, b)));
  }
  o.require(worst < kIouTol, "iou deviation " + std::to_string(worst));

  const BBoxd g{0, 0, 10, 10};
  const auto one = detection_prf({{{g}, {{BBoxd{0, 0, 10, 7.1}, 0.9}}}}, {});
  o.require(one.precision == 1 && one.recall == 1 && one.f_score == 1, "IoU 0.71 case not P=R=F=1");
  const auto spurious = detection_prf({{{g}, {{g, 0.9}, {BBoxd{50, 50, 10, 10}, 0.5}}}}, {});
  o.require(spurious.precision == 0.5 && spurious.recall == 1 && std::abs(spurious.f_score - 2.0 / 3.0) < 1e-12,
            "spurious box case");
  if (o.pass) o.detail = "max |iou - pixel count| " + fmt(worst, 12) + ", hand cases hold";
  return o;
}

// ---- 5 ----------------------------------------------------------------------

bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files, std::string& first_diff) {
  std::map<std::string, fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa[fs::relative(e.path(), a).generic_string()] = e.path();
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb[fs::relative(e.path(), b).generic_string()] = e.path();
  files = fa.size();
  if (fa.size() != fb.size()) {
    first_diff = "file counts " + std::to_string(fa.size()) + " vs " + std::to_string(fb.size());
    return false;
  }
  for (const auto& [rel, path] : fa) {
    const auto it = fb.find(rel);
    if (it == fb.end() || slurp(path) != slurp(it->second)) {
      first_diff = rel;
      return false;
    }
  }
  return true;
}

Outcome template_corpus() {
  Outcome o;
  const auto dir = work_dir() / "c5";
  const auto specs = builtin_layout_specs();
  const auto atlas = builtin_glyph_atlas();
  TemplateCorpusOptions opt;
  opt.total = 600;
  opt.augmentation = AugmentationConfig::defaults(5);
  opt.workers = 1;
  const auto m = generate_template_corpus(specs, atlas, opt, dir / "w1");
  opt.workers = 8;
  (void)generate_template_corpus(specs, atlas, opt, dir / "w8");

  std::map<std::string, std::vector<std::string>> texts;
  for (const auto& e : m.entries) texts[e.annotation.layout.name()].push_back(e.annotation.text);
  o.require(texts.size() == 6, std::to_string(texts.size()) + " layouts");
  for (const auto& [layout, list] : texts) o.require(list.size() == 100, layout + " has " + std::to_string(list.size()));

  double worst = 0;
  for (const auto& spec : specs) {
    const auto& list = texts[spec.layout.name()];
    for (std::size_t s = 0; s < spec.slots.size(); ++s) {
      const auto& alphabet = spec.slots[s].alphabet;
      const double ideal = static_cast<double>(list.size()) / static_cast<double>(alphabet.size());
      for (char c : alphabet) {
        const auto n = std::count_if(list.begin(), list.end(), [&](const std::string& t) { return t[s] == c; });
        worst = std::max(worst, std::abs(static_cast<double>(n) - ideal));
      }
    }
  }
  o.require(worst <= 1.0, "slot count off balance by " + fmt(worst));

  std::size_t files = 0;
  std::string diff;
  o.require(same_tree(dir / "w1", dir / "w8", files, diff), "1 vs 8 workers differ at " + diff);
  if (o.pass)
    o.detail = "100 per layout, max slot deviation " + fmt(worst, 2) + ", " + std::to_string(files) +
               " files identical at 1 and 8 workers";
  return o;
}

// ---- 6 ----------------------------------------------------------------------

bool in_boxes(const std::vector<CharBox>& boxes, int x, int y) {
  for (const auto& b : boxes)
    if (x >= b.box.x && x < b.box.right() && y >= b.box.y && y < b.box.bottom()) return true;
  return false;
}

Outcome permutation_suite() {
  Outcome o;
  const auto src_dir = work_dir() / "c5" / "w1";
  const auto manifest = load_manifest(src_dir / "manifest.jsonl");
  PermutationPolicy policy;
  policy.mode = PermutationMode::SameKind;
  policy.max_variants = 1;
  BalanceState counts;
  std::size_t made = 0, locality_ok = 0, pattern_ok = 0;
  for (std::size_t i = 0; i < manifest.entries.size() && made < 100; ++i) {
    const auto& ann = manifest.entries[i].annotation;
    if (!check_feasible(*ann.char_boxes, plate_bounds(ann))) continue;
    const auto plans = plan_permutations(ann, policy, counts, 1000 + i);
    if (plans.empty()) continue;
    const Image src = to_rgb(read_png(resolve_image_path(src_dir / "manifest.jsonl", ann)));
    const auto out = apply_permutation(src, ann, plans[0]);
    ++made;
    bool local = out.image.width() == src.width() && out.image.height() == src.height();
    for (int y = 0; y < src.height() && local; ++y)
      for (int x = 0; x < src.width() && local; ++x)
        if (!in_boxes(*out.annotation.char_boxes, x, y)) local = get_rgb(out.image, x, y) == get_rgb(src, x, y);
    locality_ok += local;
    bool pattern = out.annotation.text.size() == ann.text.size() && out.annotation.text != ann.text;
    for (std::size_t k = 0; k < ann.text.size() && pattern; ++k)
      pattern = is_letter(out.annotation.text[k]) == is_letter(ann.text[k]) &&
                is_digit(out.annotation.text[k]) == is_digit(ann.text[k]);
    pattern_ok += pattern;
  }
  o.require(made == 100, "only " + std::to_string(made) + " permutations");
  o.require(locality_ok == made, std::to_string(made - locality_ok) + " permutations touched pixels outside boxes");
  o.require(pattern_ok == made, std::to_string(made - pattern_ok) + " permutations broke the letter/digit pattern");

  // Disjoint boxes of widths 8 and 20 with a 5 px gap collide once both are 20 wide.
  LpAnnotation bad;
  bad.dataset_id = "x";
  bad.image_id = "overlap";
  bad.layout = LayoutClass::brazilian();
  bad.corners = axis_aligned_quad(0.0, 0.0, 100.0, 40.0);
  bad.text = "A1";
  bad.char_boxes = std::vector<CharBox>{{{10, 10, 8, 20}, 'A'}, {{23, 10, 20, 20}, '1'}};
  bad.image_size = std::pair{100, 40};
  bool rejected = !check_feasible(*bad.char_boxes, plate_bounds(bad));
  try {
    (void)plan_permutations(bad, policy, counts, 1);
    rejected = false;
  } catch (const Error& e) {
    rejected = rejected && e.code() == Errc::Infeasible;
  }
  o.require(rejected, "post-equalization overlap accepted");
  if (o.pass) o.detail = "100 permutations local and pattern-preserving; overlap case rejected";
  return o;
}

// ---- 7 ----------------------------------------------------------------------

// sRGB (D65) to CIELAB, written from the standard formulas.
std::array<double, 3> lab_oracle(Rgb c) {
  auto lin = [](std::uint8_t v) {
    const double s = v / 255.0;
    return s <= 0.04045 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
  };
  const double r = lin(c.r), g = lin(c.g), b = lin(c.b);
  const double x = (0.4124 * r + 0.3576 * g + 0.1805 * b) / 0.95047;
  const double y = 0.2126 * r + 0.7152 * g + 0.0722 * b;
  const double z = (0.0193 * r + 0.1192 * g + 0.9505 * b) / 1.08883;
  auto f = [](double t) { return t > 216.0 / 24389.0 ? std::cbrt(t) : (24389.0 / 27.0 * t + 16.0) / 116.0; };
  return {116 * f(y) - 16, 500 * (f(x) - f(y)), 200 * (f(y) - f(z))};
}

double lab_dist_oracle(Rgb a, Rgb b) {
  const auto p = lab_oracle(a), q = lab_oracle(b);
  return std::sqrt((p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]) + (p[2] - q[2]) * (p[2] - q[2]));
}

Outcome mask_round_trip() {
  Outcome o;
  const double exclusion = 20.0;
  const auto palette = generate_palette(palette_keys(builtin_layouts()), 31, exclusion);

  std::set<Rgb> distinct;
  double min_pair = 1e9, min_black = 1e9;
  std::vector<Rgb> colors;
  for (const auto& [k, c] : palette.colors) {
    distinct.insert(c);
    colors.push_back(c);
    min_black = std::min(min_black, lab_dist_oracle(c, Rgb{0, 0, 0}));
  }
  for (std::size_t i = 0; i < colors.size(); ++i)
    for (std::size_t j = i + 1; j < colors.size(); ++j) min_pair = std::min(min_pair, lab_dist_oracle(colors[i], colors[j]));
  o.require(distinct.size() == palette.colors.size(), "palette repeats a color");
  o.require(min_black >= exclusion - 1e-6, "a color sits " + fmt(min_black) + " from black");
  o.require(min_pair >= palette.min_pairwise_dist - 1e-3, "pairwise distance " + fmt(min_pair) + " below reported " +
                                                               fmt(palette.min_pairwise_dist));
  const std::map<std::string, Rgb> anchors{
      {"0", {228, 28, 26}}, {"A", {126, 47, 0}}, {"Mercosur", {187, 0, 170}}, {"Chinese", {127, 127, 127}}};
  for (const auto& [k, c] : anchors) o.require(palette.color_of(k) == c, "anchor " + k + " not honored");

  Rng rng(7007);
  const std::string classes = kDigits + kLetters + "*";
  const auto& layouts = builtin_layouts();
  int ok = 0;
  for (int n = 0; n < 200; ++n) {
    LpAnnotation a;
    a.dataset_id = "rand";
    a.image_id = std::to_string(n);
    a.layout = layouts[rng.below(layouts.size())];
    const double j = 5;
    a.corners = Quadd{{20 + rng.uniform(-j, j), 24 + rng.uniform(-j, j)},
                      {236 + rng.uniform(-j, j), 24 + rng.uniform(-j, j)},
                      {236 + rng.uniform(-j, j), 104 + rng.uniform(-j, j)},
                      {20 + rng.uniform(-j, j), 104 + rng.uniform(-j, j)}};
    std::vector<CharBox> boxes;
    double x = 32 + static_cast<double>(rng.below(6));
    const int len = 5 + static_cast<int>(rng.below(4));
    for (int k = 0; k < len; ++k) {
      const double w = 10 + static_cast<double>(rng.below(9));
      const double h = 30 + static_cast<double>(rng.below(11));
      const double y = 40 + static_cast<double>(rng.below(4));
      boxes.push_back({{x, y, w, h}, classes[rng.below(classes.size())]});
      x += w + 2 + static_cast<double>(rng.below(4));
    }
    for (const auto& b : boxes) a.text += b.cls;
    a.char_boxes = boxes;
    const auto decoded = decode_mask(render_mask(a, palette, 256, 128), palette);
    bool good = decoded.layout == a.layout && decoded.text() == a.text && decoded.boxes.size() == boxes.size();
    for (std::size_t k = 0; good && k < boxes.size(); ++k) {
      const auto &p = decoded.boxes[k].box, &q = boxes[k].box;
      good = std::abs(p.x - q.x) <= kMaskBoxTol && std::abs(p.y - q.y) <= kMaskBoxTol &&
             std::abs(p.right() - q.right()) <= kMaskBoxTol && std::abs(p.bottom() - q.bottom()) <= kMaskBoxTol;
    }
    ok += good;
  }
  o.require(ok == 200, std::to_string(200 - ok) + " of 200 masks failed to round-trip");
  if (o.pass)
    o.detail = "200/200 round trips; " + std::to_string(colors.size()) + " colors, min pairwise " + fmt(min_pair, 2) +
               ", min to black " + fmt(min_black, 2) + ", anchors pinned";
  return o;
}

// ---- 8 ----------------------------------------------------------------------

std::vector<GanCandidate> candidate_pool(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const auto& layouts = builtin_layouts();
  std::vector<GanCandidate> pool(n);
  char id[16];
  for (std::size_t i = 0; i < n; ++i) {
    auto& c = pool[i];
    std::snprintf(id, sizeof id, "g%08zu", i);
    c.image_id = id;
    c.layout = layouts[rng.below(layouts.size())];
    c.intended_text = testing::fixture_text(rng.below(1000000));
    c.ocr_text = rng.below(10) == 0 ? "MISREAD" : c.intended_text;
    // Coarse confidences so ties are common.
    c.ocr_confidence = static_cast<double>(rng.below(1001)) / 1000.0;
  }
  return pool;
}

// Per layout in name order: matching candidates, confidence descending then
// image id ascending, first n.
std::vector<GanCandidate> top_n_oracle(const std::vector<GanCandidate>& pool, std::size_t n) {
  std::map<std::string, std::vector<const GanCandidate*>> by_layout;
  for (const auto& c : pool)
    if (c.ocr_text == c.intended_text) by_layout[c.layout.name()].push_back(&c);
  std::vector<GanCandidate> out;
  for (auto& [name, list] : by_layout) {
    std::sort(list.begin(), list.end(), [](const GanCandidate* a, const GanCandidate* b) {
      if (a->ocr_confidence != b->ocr_confidence) return a->ocr_confidence > b->ocr_confidence;
      return a->image_id < b->image_id;
    });
    for (std::size_t i = 0; i < std::min(n, list.size()); ++i) out.push_back(*list[i]);
  }
  return out;
}

Outcome top_n_suite() {
  Outcome o;
  auto pool = candidate_pool(60000, 88);
  const auto expected = top_n_oracle(pool, 5000);
  o.require(filter_top_n(pool, 5000) == expected, "selection differs from the oracle prefix");
  Rng rng(3);
  rng.shuffle(pool);
  o.require(filter_top_n(pool, 5000) == expected, "selection depends on input order");

  const auto big = candidate_pool(1200000, 99);
  const auto kept = filter_top_n(big, 50000);
  o.require(kept.size() == 300000, "kept " + std::to_string(kept.size()) + " of 300000");
  o.require(kept == top_n_oracle(big, 50000), "1.2M selection differs from the oracle prefix");
  if (o.pass) o.detail = "60k pool matches oracle and is order-invariant; 1.2M pool -> 300000 kept";
  return o;
}

// ---- 9 ----------------------------------------------------------------------

Outcome split_suite() {
  Outcome o;
  auto make = [](const std::string& ds, int n) {
    std::vector<LpAnnotation> out;
    for (int i = 0; i < n; ++i) {
      LpAnnotation a;
      a.dataset_id = ds;
      a.image_id = ds + "_" + std::to_string(i);
      a.layout = LayoutClass::american();
      a.corners = axis_aligned_quad(0.0, 0.0, 100.0, 30.0);
      a.text = "ABC123";
      out.push_back(a);
    }
    return out;
  };
  auto anns = make("caltech-cars", 126);
  const auto english = make("englishlp", 509);
  anns.insert(anns.end(), english.begin(), english.end());
  SplitProtocol p;
  p.datasets["caltech-cars"].test_fraction = 0.365;
  p.datasets["englishlp"].test_fraction = 0.20;
  p.datasets["englishlp"].seed = 4;
  const auto m = apply_split(anns, p);
  const auto caltech = m.count("caltech-cars", Split::Test), eng = m.count("englishlp", Split::Test);
  o.require(caltech == 46, "Caltech test " + std::to_string(caltech));
  o.require(eng == 102, "EnglishLP test " + std::to_string(eng));

  std::set<std::string> seen;
  bool disjoint = true;
  for (const auto& e : m.entries) disjoint &= seen.insert(e.annotation.key()).second;
  o.require(disjoint && seen.size() == anns.size(), "split is not a partition");

  auto keys = [](const CorpusManifest& c) {
    std::set<std::string> s;
    for (const auto& e : c.entries)
      if (e.split == Split::Train) s.insert(e.annotation.key());
    return s;
  };
  const auto k50 = keys(reduce_training_fraction(m, 0.5, 12));
  const auto k25 = keys(reduce_training_fraction(m, 0.25, 12));
  const auto k10 = keys(reduce_training_fraction(m, 0.10, 12));
  o.require(std::includes(k50.begin(), k50.end(), k25.begin(), k25.end()) &&
                std::includes(k25.begin(), k25.end(), k10.begin(), k10.end()) && !k10.empty(),
            "reduced subsets are not nested");
  if (o.pass)
    o.detail = "Caltech 46, EnglishLP 102 test; partition holds; nested train subsets " + std::to_string(k50.size()) +
               " > " + std::to_string(k25.size()) + " > " + std::to_string(k10.size());
  return o;
}

// ---- 10 ---------------------------------------------------------------------

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd \"" + dir.string() + "\" && \"" PLATEFORGE_CLI "\" --quiet " + args + " >> cli.log 2>&1";
  return std::system(cmd.c_str());
}

std::uint64_t key_hash(const std::string& s, std::uint64_t salt) { return mix_seed(fnv1a64(s), {salt}); }

std::string pipeline(const fs::path& dir) {
  fs::create_directories(dir);
  auto step = [&](const std::string& args) -> std::string {
    return run_cli(dir, args) == 0 ? "" : "command failed: " + args;
  };
  std::string err;
  if (!(err = step("--seed 11 --workers 2 gen-templates --total 600 --out tpl")).empty()) return err;
  if (!(err = step("--seed 11 gen-permute --manifest tpl/manifest.jsonl --total 60 --out perm")).empty()) return err;
  if (!(err = step("--seed 11 gen-masks --total 60 --out masks")).empty()) return err;
  if (!(err = step("--seed 11 export-pairs --manifest perm/manifest.jsonl --palette masks/palette.json --out pairs"))
           .empty())
    return err;

  // Recognizer confidences for the sampled masks.
  std::vector<GanCandidate> cands;
  for (const auto& a : load_annotations(dir / "masks" / "annotations.jsonl")) {
    GanCandidate c;
    c.image_id = a.image_id;
    c.layout = a.layout;
    c.intended_text = a.text;
    const auto h = key_hash(a.image_id, 1);
    c.ocr_text = h % 5 == 0 ? "MISREAD" : a.text;
    c.ocr_confidence = static_cast<double>(h % 1000) / 1000.0;
    cands.push_back(c);
  }
  save_gan_candidates(dir / "candidates.jsonl", cands);
  if (!(err = step("filter-gan --candidates candidates.jsonl --n 6 --out kept.jsonl")).empty()) return err;

  std::ofstream(dir / "protocol.json") << R"({"datasets":{"synthetic-permuted":{"protocol":"test-only"}}})";
  if (!(err = step("--config protocol.json split --annotations perm/annotations.jsonl --out gt.jsonl")).empty())
    return err;

  // Two recognizers with known error patterns and latencies.
  std::vector<PredictionRun> runs{{"alpha", {}}, {"beta", {}}};
  for (const auto& e : load_manifest(dir / "gt.jsonl").entries)
    for (std::size_t r = 0; r < runs.size(); ++r) {
      Prediction p;
      p.dataset_id = e.annotation.dataset_id;
      p.image_id = e.annotation.image_id;
      p.text = key_hash(p.image_id, 2 + r) % (r ? 3 : 7) == 0 ? "WRONG" : e.annotation.text;
      p.quad = e.annotation.corners;
      p.score = 0.9;
      p.latency_ms = r ? 12.5 : 2.088;
      runs[r].predictions.push_back(p);
    }
  save_prediction_runs(dir / "preds.jsonl", runs);
  std::ofstream(dir / "experiment.json")
      << R"({"kind":"cross","manifests":["gt.jsonl"],"predictions":["preds.jsonl"],"seed":11})";
  std::ofstream(dir / "speed.json")
      << R"({"kind":"speed-accuracy","manifests":["gt.jsonl"],"predictions":["preds.jsonl"],"datasets":["synthetic-permuted"],"seed":11})";
  if (!(err = step("--config experiment.json eval --out report.json")).empty()) return err;
  if (!(err = step("--config speed.json eval --out speed.csv")).empty()) return err;
  if (!(err = step("report --input report.json --out report.md")).empty()) return err;
  if (!(err = step("report --input report.json --out report.csv")).empty()) return err;
  return "";
}

Outcome end_to_end() {
  Outcome o;
  const auto a = work_dir() / "c10" / "run_a", b = work_dir() / "c10" / "run_b";
  const auto ea = pipeline(a);
  o.require(ea.empty(), ea);
  if (!o.pass) return o;
  const auto eb = pipeline(b);
  o.require(eb.empty(), eb);
  if (!o.pass) return o;
  std::size_t files = 0;
  std::string diff;
  o.require(same_tree(a, b, files, diff), "runs differ at " + diff);
  const auto md = slurp(a / "report.md");
  o.require(md.find("| alpha |") != std::string::npos && md.find("| beta |") != std::string::npos,
            "report lacks model rows");
  if (o.pass) o.detail = std::to_string(files) + " output files byte-identical across two runs";
  return o;
}

}  // namespace

int main() {
  set_warning_sink([](std::string_view) {});
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "table-average reproduction", 1, table_averages},
      {2, "corner error oracle", 1, nme_oracle_suite},
      {3, "geometry suite", 10, geometry_suite},
      {4, "IoU oracle and P/R/F hand cases", 5, iou_suite},
      {5, "template corpus properties", 120, template_corpus},
      {6, "permutation locality and soundness", 60, permutation_suite},
      {7, "mask round trip and palette", 30, mask_round_trip},
      {8, "top-N filter", 30, top_n_suite},
      {9, "split counts and nesting", 1, split_suite},
      {10, "end-to-end CLI determinism", 300, end_to_end},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += " (over the " + fmt(c.budget_s, 0) + " s budget)";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << " (" << fmt(secs, 2) << " s): "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria pass" << std::endl;
  return failed ? 1 : 0;
}
