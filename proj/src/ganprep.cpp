#include "plateforge/ganprep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "plateforge/jsonl.hpp"
#include "plateforge/parallel.hpp"
#include "plateforge/rng.hpp"

namespace plateforge {

using nlohmann::json;

namespace {

double srgb_to_linear(std::uint8_t v) {
  const double c = v / 255.0;
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
}

}  // namespace

Lab to_lab(Rgb c) noexcept {
  const double r = srgb_to_linear(c.r), g = srgb_to_linear(c.g), b = srgb_to_linear(c.b);
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  const double fx = lab_f(x), fy = lab_f(y), fz = lab_f(z);
  return {116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)};
}

double lab_distance(const Lab& p, const Lab& q) noexcept {
  return std::sqrt((p.l - q.l) * (p.l - q.l) + (p.a - q.a) * (p.a - q.a) + (p.b - q.b) * (p.b - q.b));
}

std::string class_key(char cls) { return std::string(1, cls); }

std::string layout_key(const LayoutClass& layout) { return layout.name(); }

std::vector<std::string> palette_keys(const std::vector<LayoutClass>& layouts) {
  std::vector<std::string> keys;
  for (char c : kDigits + kLetters) keys.push_back(class_key(c));
  keys.push_back(class_key(kWildcard));
  for (const auto& l : layouts) keys.push_back(layout_key(l));
  return keys;
}

const std::map<std::string, Rgb>& published_anchor_colors() {
  static const std::map<std::string, Rgb> anchors{
      {"0", {228, 28, 26}}, {"A", {126, 47, 0}}, {"Mercosur", {187, 0, 170}}, {"Chinese", {127, 127, 127}}};
  return anchors;
}

Rgb ClassPalette::color_of(const std::string& key) const {
  const auto it = colors.find(key);
  if (it == colors.end()) throw Error(Errc::MissingClassColor, "no palette color for '" + key + "'");
  return it->second;
}

std::optional<std::string> ClassPalette::key_of(Rgb c) const {
  for (const auto& [k, v] : colors)
    if (v == c) return k;
  return std::nullopt;
}

void ClassPalette::validate() const {
  std::vector<std::pair<std::string, Lab>> labs;
  std::set<Rgb> seen;
  for (const auto& [k, c] : colors) {
    if (!seen.insert(c).second) throw Error(Errc::ValidationError, "palette color of '" + k + "' is not unique");
    const Lab lab = to_lab(c);
    if (lab_distance(lab, to_lab(kBlack)) < black_exclusion_dist)
      throw Error(Errc::ValidationError, "palette color of '" + k + "' is too close to black");
    labs.emplace_back(k, lab);
  }
  for (std::size_t i = 0; i < labs.size(); ++i)
    for (std::size_t j = i + 1; j < labs.size(); ++j)
      if (lab_distance(labs[i].second, labs[j].second) < min_pairwise_dist - 1e-9)
        throw Error(Errc::ValidationError, "palette colors of '" + labs[i].first + "' and '" + labs[j].first +
                                               "' are closer than the minimum distance");
}

json to_json(const ClassPalette& p) {
  json colors = json::object();
  for (const auto& [k, c] : p.colors) colors[k] = {c.r, c.g, c.b};
  return {{"colors", colors}, {"min_pairwise_dist", p.min_pairwise_dist}, {"black_exclusion_dist", p.black_exclusion_dist}};
}

ClassPalette palette_from_json(const json& j) {
  ClassPalette p;
  try {
    for (const auto& [k, v] : j.at("colors").items()) {
      const auto rgb = v.get<std::vector<int>>();
      if (rgb.size() != 3 || std::any_of(rgb.begin(), rgb.end(), [](int x) { return x < 0 || x > 255; }))
        throw Error(Errc::ParseError, "palette color of '" + k + "' must be [r, g, b] in 0..255");
      p.colors[k] = {static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]), static_cast<std::uint8_t>(rgb[2])};
    }
    p.min_pairwise_dist = j.value("min_pairwise_dist", 0.0);
    p.black_exclusion_dist = j.value("black_exclusion_dist", 0.0);
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, std::string("palette: ") + e.what());
  }
  p.validate();
  return p;
}

ClassPalette generate_palette(const std::vector<std::string>& keys, std::uint64_t seed, double black_exclusion_dist,
                              const std::map<std::string, Rgb>& anchors) {
  if (keys.size() > 4096) throw Error(Errc::InfeasiblePalette, "at most 4096 keys are supported");
  if (std::set<std::string>(keys.begin(), keys.end()).size() != keys.size())
    throw Error(Errc::InvalidArgument, "palette keys must be distinct");

  const Lab black = to_lab(kBlack);
  ClassPalette palette;
  palette.black_exclusion_dist = black_exclusion_dist;
  std::vector<Lab> chosen;
  for (const auto& k : keys) {
    const auto it = anchors.find(k);
    if (it == anchors.end()) continue;
    const Lab lab = to_lab(it->second);
    if (lab_distance(lab, black) < black_exclusion_dist)
      throw Error(Errc::InfeasiblePalette, "anchor color of '" + k + "' lies inside the black exclusion zone");
    if (palette.key_of(it->second)) throw Error(Errc::InfeasiblePalette, "anchor colors must be distinct");
    palette.colors[k] = it->second;
    chosen.push_back(lab);
  }

  constexpr int kLevels = 32;
  std::vector<Rgb> gamut;
  std::vector<Lab> gamut_lab;
  std::vector<double> nearest;
  for (int r = 0; r < kLevels; ++r)
    for (int g = 0; g < kLevels; ++g)
      for (int b = 0; b < kLevels; ++b) {
        auto level = [](int k) { return static_cast<std::uint8_t>(std::lround(k * 255.0 / (kLevels - 1))); };
        const Rgb c{level(r), level(g), level(b)};
        const Lab lab = to_lab(c);
        const double d = lab_distance(lab, black);
        if (d < black_exclusion_dist || palette.key_of(c)) continue;
        gamut.push_back(c);
        gamut_lab.push_back(lab);
        nearest.push_back(d);
      }
  std::vector<std::size_t> order(gamut.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng(seed).shuffle(order);

  auto absorb = [&](const Lab& lab) {
    for (std::size_t i = 0; i < gamut.size(); ++i)
      if (nearest[i] >= 0) nearest[i] = std::min(nearest[i], lab_distance(lab, gamut_lab[i]));
  };
  for (const auto& lab : chosen) absorb(lab);

  for (const auto& k : keys) {
    if (palette.colors.contains(k)) continue;
    std::size_t best = gamut.size();
    for (std::size_t i : order)
      if (nearest[i] >= 0 && (best == gamut.size() || nearest[i] > nearest[best])) best = i;
    if (best == gamut.size())
      throw Error(Errc::InfeasiblePalette, std::to_string(keys.size()) + " colors do not fit outside the black exclusion zone");
    palette.colors[k] = gamut[best];
    nearest[best] = -1;
    chosen.push_back(gamut_lab[best]);
    absorb(gamut_lab[best]);
  }

  double min_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < chosen.size(); ++i)
    for (std::size_t j = i + 1; j < chosen.size(); ++j) min_d = std::min(min_d, lab_distance(chosen[i], chosen[j]));
  palette.min_pairwise_dist = std::isfinite(min_d) ? min_d : 0.0;
  return palette;
}

Image render_mask(const LpAnnotation& ann, const ClassPalette& palette, int width, int height) {
  Image mask(width, height, 3, 0);
  const Rgb plate = palette.color_of(layout_key(ann.layout));
  std::vector<Rgb> chars;
  if (ann.char_boxes)
    for (const auto& b : *ann.char_boxes) chars.push_back(palette.color_of(class_key(b.cls)));

  double x0 = ann.corners.tl.x(), x1 = x0, y0 = ann.corners.tl.y(), y1 = y0;
  for (int k = 1; k < 4; ++k) {
    x0 = std::min(x0, ann.corners[k].x());
    x1 = std::max(x1, ann.corners[k].x());
    y0 = std::min(y0, ann.corners[k].y());
    y1 = std::max(y1, ann.corners[k].y());
  }
  const int ix0 = std::max(0, static_cast<int>(std::floor(x0))), ix1 = std::min(width - 1, static_cast<int>(std::ceil(x1)));
  const int iy0 = std::max(0, static_cast<int>(std::floor(y0))), iy1 = std::min(height - 1, static_cast<int>(std::ceil(y1)));
  for (int y = iy0; y <= iy1; ++y)
    for (int x = ix0; x <= ix1; ++x)
      if (contains(ann.corners, Point2d(x, y))) set_rgb(mask, x, y, plate);

  if (ann.char_boxes) {
    for (std::size_t i = 0; i < ann.char_boxes->size(); ++i) {
      const auto& b = (*ann.char_boxes)[i].box;
      const int bx0 = std::max(0, static_cast<int>(std::ceil(b.x - 1e-9)));
      const int bx1 = std::min(width, static_cast<int>(std::ceil(b.right() - 1e-9)));
      const int by0 = std::max(0, static_cast<int>(std::ceil(b.y - 1e-9)));
      const int by1 = std::min(height, static_cast<int>(std::ceil(b.bottom() - 1e-9)));
      for (int y = by0; y < by1; ++y)
        for (int x = bx0; x < bx1; ++x) set_rgb(mask, x, y, chars[i]);
    }
  }
  return mask;
}

std::string DecodedMask::text() const {
  std::string t;
  for (const auto& b : boxes) t.push_back(b.cls);
  return t;
}

DecodedMask decode_mask(const Image& mask, const ClassPalette& palette) {
  std::map<Rgb, std::string> keys;
  for (const auto& [k, c] : palette.colors) keys[c] = k;
  auto is_class_key = [](const std::string& k) { return k.size() == 1 && is_char_class(k[0]); };

  const int w = mask.width(), h = mask.height();
  // -1 background, -2 plate, otherwise the class character.
  std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
  std::map<std::string, std::size_t> plate_votes;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Rgb c = get_rgb(mask, x, y);
      if (c == kBlack) continue;
      const auto it = keys.find(c);
      if (it == keys.end())
        throw Error(Errc::UnknownColor, "pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") has color (" +
                                            std::to_string(c.r) + ", " + std::to_string(c.g) + ", " +
                                            std::to_string(c.b) + ") outside the palette");
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (is_class_key(it->second)) {
        label[idx] = static_cast<unsigned char>(it->second[0]);
      } else {
        label[idx] = -2;
        ++plate_votes[it->second];
      }
    }
  if (plate_votes.empty()) throw Error(Errc::NoPlateRegion, "mask has no layout-colored pixels");

  DecodedMask out;
  out.layout = LayoutClass(std::max_element(plate_votes.begin(), plate_votes.end(), [](const auto& a, const auto& b) {
                             return a.second < b.second;
                           })->first);

  std::vector<char> visited(label.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < label.size(); ++start) {
    if (label[start] < 0 || visited[start]) continue;
    const int cls = label[start];
    int minx = w, maxx = -1, miny = h, maxy = -1;
    stack.assign(1, start);
    visited[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      minx = std::min(minx, x);
      maxx = std::max(maxx, x);
      miny = std::min(miny, y);
      maxy = std::max(maxy, y);
      const int nx[4] = {x - 1, x + 1, x, x}, ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
        const std::size_t q = static_cast<std::size_t>(ny[k]) * w + nx[k];
        if (!visited[q] && label[q] == cls) {
          visited[q] = 1;
          stack.push_back(q);
        }
      }
    }
    out.boxes.push_back({{static_cast<double>(minx), static_cast<double>(miny), static_cast<double>(maxx - minx + 1),
                          static_cast<double>(maxy - miny + 1)},
                         static_cast<char>(cls)});
  }

  // Reading order: group into rows by vertical overlap, rows top to bottom,
  // boxes left to right within a row.
  auto& boxes = out.boxes;
  std::sort(boxes.begin(), boxes.end(), [](const CharBox& a, const CharBox& b) {
    return a.box.y != b.box.y ? a.box.y < b.box.y : a.box.x < b.box.x;
  });
  std::vector<std::vector<CharBox>> rows;
  double row_bottom = 0;
  for (const auto& b : boxes) {
    const double overlap = rows.empty() ? 0 : row_bottom - b.box.y;
    if (rows.empty() || overlap < 0.5 * b.box.h) {
      rows.emplace_back();
      row_bottom = b.box.bottom();
    } else {
      row_bottom = std::max(row_bottom, b.box.bottom());
    }
    rows.back().push_back(b);
  }
  boxes.clear();
  for (auto& row : rows) {
    std::sort(row.begin(), row.end(), [](const CharBox& a, const CharBox& b) { return a.box.x < b.box.x; });
    boxes.insert(boxes.end(), row.begin(), row.end());
  }
  return out;
}

namespace {

Homographyd pair_transform(const LpAnnotation& ann, const PairOptions& options) {
  const BBoxd b = enclosing_bbox(ann.corners);
  const double x0 = b.x - options.margin * b.w, x1 = b.right() + options.margin * b.w;
  const double y0 = b.y - options.margin * b.h, y1 = b.bottom() + options.margin * b.h;
  const double sx = (options.width - 1) / (x1 - x0), sy = (options.height - 1) / (y1 - y0);
  Homographyd t;
  t.m << sx, 0, -x0 * sx, 0, sy, -y0 * sy, 0, 0, 1;
  return t;
}

std::string padded(std::size_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", v);
  return buf;
}

void check_pair_options(const PairOptions& o) {
  if (o.width < 2 || o.height < 2) throw Error(Errc::InvalidArgument, "pair canvas must be at least 2x2");
  if (!(o.margin >= 0) || o.margin > 1) throw Error(Errc::InvalidArgument, "pair margin must be in [0, 1]");
}

}  // namespace

LpAnnotation to_pair_frame(const LpAnnotation& ann, const PairOptions& options) {
  const Homographyd t = pair_transform(ann, options);
  LpAnnotation out = ann;
  out.corners = t.apply(ann.corners);
  if (ann.char_boxes) {
    std::vector<CharBox> boxes;
    for (const auto& cb : *ann.char_boxes) {
      const Point2d a = t.apply(Point2d(cb.box.x, cb.box.y));
      const Point2d b = t.apply(Point2d(cb.box.right(), cb.box.bottom()));
      boxes.push_back({{a.x(), a.y(), b.x() - a.x(), b.y() - a.y()}, cb.cls});
    }
    out.char_boxes = std::move(boxes);
  }
  out.image_size = std::pair{options.width, options.height};
  return out;
}

std::size_t export_pairs(const CorpusManifest& manifest, const std::filesystem::path& manifest_path,
                         const ClassPalette& palette, const std::filesystem::path& out_dir, const PairOptions& options) {
  check_pair_options(options);
  for (const auto& e : manifest.entries)
    if (!e.annotation.char_boxes)
      throw Error(Errc::MissingCharBoxes, e.annotation.key() + " has no character boxes for its mask");

  std::filesystem::create_directories(out_dir / "pairs");
  const int w = options.width, h = options.height;
  std::vector<json> rows(manifest.entries.size());
  parallel_for(manifest.entries.size(), options.workers, [&](std::size_t i) {
    const LpAnnotation& ann = manifest.entries[i].annotation;
    const Image img = to_rgb(read_image(resolve_image_path(manifest_path, ann)));
    LpAnnotation frame = to_pair_frame(ann, options);
    Image target = warp_image(img, pair_transform(ann, options), w, h, kGray);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (!contains(frame.corners, Point2d(x, y))) set_rgb(target, x, y, kGray);
    Image ab(2 * w, h, 3, 0);
    paste(ab, render_mask(frame, palette, w, h), 0, 0);
    paste(ab, target, w, 0);
    const std::string rel = "pairs/pair_" + padded(i) + ".png";
    write_png(out_dir / rel, ab);
    frame.image_path = rel;
    rows[i] = {{"pair", rel}, {"source", ann.key()}, {"annotation", to_json(frame)}};
  });
  write_jsonl(out_dir / "index.jsonl", rows);
  return rows.size();
}

std::size_t sample_generation_masks(const std::vector<LayoutSpec>& specs, const ClassPalette& palette,
                                    std::size_t total, std::uint64_t seed, const std::filesystem::path& out_dir,
                                    const PairOptions& options) {
  check_pair_options(options);
  if (specs.empty()) throw Error(Errc::InvalidArgument, "no layout specs");
  for (const auto& s : specs) s.validate();

  std::vector<LpAnnotation> anns;
  BalanceState state;
  const auto counts = even_counts(total, specs.size());
  for (std::size_t li = 0; li < specs.size(); ++li) {
    const LayoutSpec& spec = specs[li];
    for (std::size_t k = 0; k < counts[li]; ++k) {
      LpAnnotation ann;
      ann.dataset_id = "gan-masks";
      ann.image_id = "mask_" + spec.layout.name() + "_" + padded(k);
      ann.layout = spec.layout;
      ann.corners = axis_aligned_quad(0.0, 0.0, spec.template_image.width() - 1.0, spec.template_image.height() - 1.0);
      ann.text = sample_sequence(spec, state, mix_seed(seed, {0x6a5d3c1bULL, li, k}));
      std::vector<CharBox> boxes;
      for (std::size_t i = 0; i < spec.slots.size(); ++i) boxes.push_back({spec.slots[i].box, ann.text[i]});
      ann.char_boxes = std::move(boxes);
      ann = to_pair_frame(ann, options);
      ann.image_path = "masks/" + ann.image_id + ".png";
      anns.push_back(std::move(ann));
    }
  }
  std::filesystem::create_directories(out_dir / "masks");
  parallel_for(anns.size(), options.workers, [&](std::size_t i) {
    write_png(out_dir / *anns[i].image_path, render_mask(anns[i], palette, options.width, options.height));
  });
  save_annotations(out_dir / "annotations.jsonl", anns);
  return anns.size();
}

json to_json(const GanCandidate& c) {
  return {{"image", c.image_id},
          {"layout", c.layout.name()},
          {"text", c.intended_text},
          {"ocr_text", c.ocr_text},
          {"confidence", c.ocr_confidence}};
}

GanCandidate gan_candidate_from_json(const json& j) {
  GanCandidate c;
  try {
    c.image_id = j.at("image").get<std::string>();
    c.layout = LayoutClass(j.at("layout").get<std::string>());
    c.intended_text = j.at("text").get<std::string>();
    c.ocr_text = j.at("ocr_text").get<std::string>();
    c.ocr_confidence = j.at("confidence").get<double>();
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  if (!(c.ocr_confidence >= 0 && c.ocr_confidence <= 1))
    throw Error(Errc::ValidationError, c.image_id + ": confidence must lie in [0, 1]");
  return c;
}

std::vector<GanCandidate> load_gan_candidates(const std::filesystem::path& path) {
  std::vector<GanCandidate> out;
  for_each_jsonl(path, [&](const json& j) { out.push_back(gan_candidate_from_json(j)); });
  return out;
}

void save_gan_candidates(const std::filesystem::path& path, const std::vector<GanCandidate>& candidates) {
  std::vector<json> rows;
  for (const auto& c : candidates) rows.push_back(to_json(c));
  write_jsonl(path, rows);
}

std::vector<GanCandidate> filter_top_n(const std::vector<GanCandidate>& candidates, std::size_t n_per_layout,
                                       bool require_text_match) {
  if (n_per_layout < 1) throw Error(Errc::InvalidArgument, "n per layout must be at least 1");
  std::map<LayoutClass, std::vector<GanCandidate>> by_layout;
  for (const auto& c : candidates) {
    if (require_text_match && normalize_plate_text(c.ocr_text) != normalize_plate_text(c.intended_text)) {
      by_layout.try_emplace(c.layout);
      continue;
    }
    by_layout[c.layout].push_back(c);
  }
  std::vector<GanCandidate> out;
  for (auto& [layout, list] : by_layout) {
    std::sort(list.begin(), list.end(), [](const GanCandidate& a, const GanCandidate& b) {
      if (a.ocr_confidence != b.ocr_confidence) return a.ocr_confidence > b.ocr_confidence;
      return std::tie(a.image_id, a.ocr_text, a.intended_text) < std::tie(b.image_id, b.ocr_text, b.intended_text);
    });
    if (list.size() < n_per_layout)
      warn("layout " + layout.name() + " has only " + std::to_string(list.size()) + " eligible candidates for top " +
           std::to_string(n_per_layout));
    const std::size_t take = std::min(list.size(), n_per_layout);
    out.insert(out.end(), list.begin(), list.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

}  // namespace plateforge
