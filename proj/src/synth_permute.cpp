#include "plateforge/synth_permute.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "plateforge/parallel.hpp"
#include "plateforge/rng.hpp"

namespace plateforge {

std::string_view to_string(PermutationMode m) noexcept {
  return m == PermutationMode::SameKind ? "same-kind" : "cross-kind";
}

PermutationMode permutation_mode_from_string(std::string_view s) {
  if (s == "same-kind") return PermutationMode::SameKind;
  if (s == "cross-kind") return PermutationMode::CrossKind;
  throw Error(Errc::InvalidArgument, "unknown permutation mode '" + std::string(s) + "'");
}

void PermutationPolicy::validate() const {
  if (max_variants < 1) throw Error(Errc::ValidationError, "max_variants must be at least 1");
  for (const auto& [c, w] : balance_target) {
    if (!is_char_class(c)) throw Error(Errc::ValidationError, "balance target for non-class '" + std::string(1, c) + "'");
    if (!(w > 0) || !std::isfinite(w)) throw Error(Errc::ValidationError, "balance target weights must be positive");
  }
}

nlohmann::json to_json(const PermutationPolicy& p) {
  nlohmann::json targets = nlohmann::json::object();
  for (const auto& [c, w] : p.balance_target) targets[std::string(1, c)] = w;
  return {{"mode", to_string(p.mode)},
          {"max_variants", p.max_variants},
          {"balance_target", targets},
          {"repeat_cap", p.repeat_cap}};
}

PermutationPolicy permutation_policy_from_json(const nlohmann::json& j) {
  PermutationPolicy p;
  try {
    if (j.contains("mode")) p.mode = permutation_mode_from_string(j["mode"].get<std::string>());
    p.max_variants = j.value("max_variants", p.max_variants);
    p.repeat_cap = j.value("repeat_cap", p.repeat_cap);
    const auto targets = j.value("balance_target", nlohmann::json::object());
    for (const auto& [k, v] : targets.items()) {
      if (k.size() != 1) throw Error(Errc::ValidationError, "balance target key '" + k + "' is not one class");
      p.balance_target[k[0]] = v.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("permutation policy: ") + e.what());
  }
  p.validate();
  return p;
}

std::vector<CharBox> equalize_boxes(const std::vector<CharBox>& boxes, const std::optional<BBoxd>& bounds) {
  double max_w = 0, max_h = 0;
  for (const auto& b : boxes) {
    max_w = std::max(max_w, b.box.w);
    max_h = std::max(max_h, b.box.h);
  }
  const long w = static_cast<long>(std::ceil(max_w - 1e-9));
  const long h = static_cast<long>(std::ceil(max_h - 1e-9));
  long lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
  if (bounds) {
    lo_x = static_cast<long>(std::ceil(bounds->x - 1e-9));
    hi_x = static_cast<long>(std::floor(bounds->right() + 1e-9));
    lo_y = static_cast<long>(std::ceil(bounds->y - 1e-9));
    hi_y = static_cast<long>(std::floor(bounds->bottom() + 1e-9));
    if (w > hi_x - lo_x || h > hi_y - lo_y)
      throw Error(Errc::CannotFit, "equalized size " + std::to_string(w) + "x" + std::to_string(h) +
                                       " exceeds the plate bounds");
  }
  std::vector<CharBox> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) {
    const auto c = b.box.center();
    long x = std::lround(c.x() - w / 2.0);
    long y = std::lround(c.y() - h / 2.0);
    if (bounds) {
      x = std::clamp(x, lo_x, hi_x - w);
      y = std::clamp(y, lo_y, hi_y - h);
    }
    out.push_back({{static_cast<double>(x), static_cast<double>(y), static_cast<double>(w), static_cast<double>(h)}, b.cls});
  }
  return out;
}

bool check_feasible(const std::vector<CharBox>& boxes, const std::optional<BBoxd>& bounds) {
  std::vector<CharBox> eq;
  try {
    eq = equalize_boxes(boxes, bounds);
  } catch (const Error& e) {
    if (e.code() == Errc::CannotFit) return false;
    throw;
  }
  for (std::size_t i = 0; i < eq.size(); ++i)
    for (std::size_t j = i + 1; j < eq.size(); ++j)
      if (intersection_area(eq[i].box, eq[j].box) > 0) return false;
  return true;
}

std::optional<BBoxd> plate_bounds(const LpAnnotation& ann) {
  BBoxd b;
  try {
    b = enclosing_bbox(ann.corners);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (!ann.image_size) return b;
  const double x0 = std::max(0.0, b.x), y0 = std::max(0.0, b.y);
  const double x1 = std::min<double>(ann.image_size->first, b.right());
  const double y1 = std::min<double>(ann.image_size->second, b.bottom());
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  return BBoxd{x0, y0, x1 - x0, y1 - y0};
}

namespace {

int kind(char c, PermutationMode mode) {
  if (c == kWildcard) return 2;
  if (mode == PermutationMode::CrossKind) return 0;
  return is_digit(c) ? 1 : 0;
}

}  // namespace

std::vector<PermutationPlan> plan_permutations(const LpAnnotation& ann, const PermutationPolicy& policy,
                                               const BalanceState& counts, std::uint64_t seed) {
  policy.validate();
  if (!ann.char_boxes) throw Error(Errc::MissingCharBoxes, ann.key() + " has no character boxes");
  if (!check_feasible(*ann.char_boxes, plate_bounds(ann)))
    throw Error(Errc::Infeasible, ann.key() + ": character boxes overlap or do not fit after equalization");

  const std::string& text = ann.text;
  const std::size_t n = text.size();
  auto weight = [&](char c) {
    const auto it = policy.balance_target.find(c);
    return it == policy.balance_target.end() ? 1.0 : it->second;
  };

  Rng rng(seed);
  BalanceState local;
  std::set<std::string> seen{text};
  std::vector<PermutationPlan> plans;
  const std::size_t attempts = policy.max_variants * 8;
  for (std::size_t a = 0; a < attempts && plans.size() < policy.max_variants; ++a) {
    PermutationPlan plan{ann.key(), std::string(n, ' '), std::vector<std::size_t>(n)};
    std::vector<std::size_t> used(n, 0);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      const int k = kind(text[i], policy.mode);
      double best = 0;
      std::string ties;
      for (std::size_t j = 0; j < n; ++j) {
        const char c = text[j];
        if (kind(c, policy.mode) != k || (policy.repeat_cap && used[j] >= policy.repeat_cap)) continue;
        if (ties.find(c) != std::string::npos) continue;
        const double score =
            static_cast<double>(counts.count(ann.layout, i, c) + local.count(ann.layout, i, c)) / weight(c);
        if (ties.empty() || score < best) {
          best = score;
          ties.assign(1, c);
        } else if (score == best) {
          ties.push_back(c);
        }
      }
      if (ties.empty()) {
        ok = false;
        break;
      }
      const char pick = ties[rng.below(ties.size())];
      std::size_t src = n;
      for (std::size_t j = 0; j < n; ++j)
        if (text[j] == pick && (!policy.repeat_cap || used[j] < policy.repeat_cap) && (src == n || used[j] < used[src]))
          src = j;
      ++used[src];
      plan.slot_map[i] = src;
      plan.new_text[i] = pick;
      local.increment(ann.layout, i, pick);
    }
    if (ok && seen.insert(plan.new_text).second) plans.push_back(std::move(plan));
  }
  return plans;
}

PermutedPlate apply_permutation(const Image& img, const LpAnnotation& ann, const PermutationPlan& plan) {
  auto mismatch = [&](const std::string& why) { throw Error(Errc::GeometryMismatch, ann.key() + ": " + why); };
  if (!ann.char_boxes) mismatch("no character boxes");
  const auto& boxes = *ann.char_boxes;
  const std::size_t n = boxes.size();
  if (plan.source_id != ann.key()) mismatch("plan was made for " + plan.source_id);
  if (plan.new_text.size() != n || plan.slot_map.size() != n) mismatch("plan length differs from the plate");
  if (ann.image_size && (ann.image_size->first != img.width() || ann.image_size->second != img.height()))
    mismatch("image size differs from the annotation");
  for (std::size_t i = 0; i < n; ++i) {
    if (plan.slot_map[i] >= n) mismatch("slot map points past the last slot");
    if (plan.new_text[i] != ann.text[plan.slot_map[i]]) mismatch("plan text disagrees with the mapped slots");
  }
  const auto eq = equalize_boxes(boxes, plate_bounds(ann));
  for (const auto& b : eq)
    if (b.box.x < 0 || b.box.y < 0 || b.box.right() > img.width() || b.box.bottom() > img.height())
      mismatch("equalized box leaves the image");

  PermutedPlate out{img, ann};
  std::vector<CharBox> new_boxes;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& from = eq[plan.slot_map[i]].box;
    const auto& to = eq[i].box;
    paste(out.image,
          crop(img, static_cast<int>(from.x), static_cast<int>(from.y), static_cast<int>(from.w), static_cast<int>(from.h)),
          static_cast<int>(to.x), static_cast<int>(to.y));
    new_boxes.push_back({to, plan.new_text[i]});
  }
  out.annotation.text = plan.new_text;
  out.annotation.char_boxes = std::move(new_boxes);
  return out;
}

namespace {

std::string padded(std::size_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", v);
  return buf;
}

}  // namespace

CorpusManifest generate_permuted_corpus(const CorpusManifest& manifest, const std::filesystem::path& manifest_path,
                                        const PermutationPolicy& policy, const PermutedCorpusOptions& options,
                                        const std::filesystem::path& out_dir) {
  policy.validate();
  std::map<LayoutClass, std::vector<const LpAnnotation*>> sources;
  std::set<LayoutClass> seen_layouts;
  std::map<std::string, std::vector<std::string>> skipped;
  for (const auto& e : manifest.entries) {
    if (e.split != Split::Train) continue;
    const auto& ann = e.annotation;
    seen_layouts.insert(ann.layout);
    if (!ann.char_boxes)
      skipped["no character boxes"].push_back(ann.key());
    else if (!ann.image_path)
      skipped["no image path"].push_back(ann.key());
    else if (!check_feasible(*ann.char_boxes, plate_bounds(ann)))
      skipped["character boxes overlap or do not fit after equalization"].push_back(ann.key());
    else
      sources[ann.layout].push_back(&ann);
  }
  for (const auto& [reason, keys] : skipped) {
    std::string msg = "skipping " + std::to_string(keys.size()) + " source plates (" + reason + "), e.g.";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, keys.size()); ++i) msg += (i ? ", " : " ") + keys[i];
    warn(msg);
  }
  if (sources.empty()) throw Error(Errc::InsufficientFeasibleSources, "no feasible source plates");
  for (const auto& l : seen_layouts)
    if (!sources.contains(l)) warn("layout " + l.name() + " has no feasible source plates");
  if (options.total < sources.size())
    throw Error(Errc::InvalidArgument, "need at least one plate per layout with feasible sources");

  struct Job {
    const LpAnnotation* source;
    PermutationPlan plan;
    std::string id;
  };
  std::vector<Job> jobs;
  BalanceState tally;
  const auto counts = even_counts(options.total, sources.size());
  std::size_t li = 0;
  for (const auto& [layout, srcs] : sources) {
    const std::size_t want = counts[li++];
    std::vector<std::set<std::string>> used(srcs.size());
    std::vector<bool> exhausted(srcs.size(), false);
    std::size_t live = srcs.size(), next = 0;
    for (std::size_t k = 0; k < want;) {
      if (live == 0)
        throw Error(Errc::InsufficientFeasibleSources, "layout " + layout.name() + " yields only " + std::to_string(k) +
                                                           " distinct permutations of " + std::to_string(want));
      const std::size_t s = next;
      next = (next + 1) % srcs.size();
      if (exhausted[s]) continue;
      const LpAnnotation& ann = *srcs[s];
      const auto plans =
          plan_permutations(ann, policy, tally, mix_seed(options.seed, {fnv1a64(ann.key()), used[s].size()}));
      const PermutationPlan* pick = nullptr;
      for (const auto& p : plans)
        if (!used[s].contains(p.new_text)) {
          pick = &p;
          break;
        }
      if (!pick) {
        exhausted[s] = true;
        --live;
        continue;
      }
      used[s].insert(pick->new_text);
      if (used[s].size() >= policy.max_variants) {
        exhausted[s] = true;
        --live;
      }
      for (std::size_t i = 0; i < pick->new_text.size(); ++i) tally.increment(layout, i, pick->new_text[i]);
      jobs.push_back({&ann, *pick, "permuted_" + layout.name() + "_" + padded(k)});
      ++k;
    }
  }

  std::filesystem::create_directories(out_dir / "images");
  std::vector<ManifestEntry> entries(jobs.size());
  parallel_for(jobs.size(), options.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    const Image src = to_rgb(read_image(resolve_image_path(manifest_path, *job.source)));
    PermutedPlate out = apply_permutation(src, *job.source, job.plan);
    const std::string rel = "images/" + job.id + ".png";
    write_png(out_dir / rel, out.image);
    auto& ann = out.annotation;
    ann.dataset_id = options.dataset_id;
    ann.image_id = job.id;
    ann.image_path = rel;
    ann.image_size = std::pair{out.image.width(), out.image.height()};
    validate(ann);
    entries[i] = {std::move(ann), Split::Train, Source::Permuted, std::nullopt};
  });

  CorpusManifest result{std::move(entries)};
  std::vector<LpAnnotation> anns;
  for (const auto& e : result.entries) anns.push_back(e.annotation);
  save_annotations(out_dir / "annotations.jsonl", anns);
  save_manifest(out_dir / "manifest.jsonl", result);
  return result;
}

}  // namespace plateforge
