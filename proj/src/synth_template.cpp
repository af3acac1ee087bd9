#include "plateforge/synth_template.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "plateforge/parallel.hpp"
#include "plateforge/rng.hpp"

namespace plateforge {

using nlohmann::json;

void LayoutSpec::validate() const {
  auto fail = [&](const std::string& why) { throw Error(Errc::ValidationError, layout.name() + " spec: " + why); };
  if (template_image.empty()) fail("missing template image");
  if (slots.empty()) fail("no slots");
  if (rows < 1 || rows > 2) fail("rows must be 1 or 2");
  if (slots.size() < min_length || slots.size() > max_length) fail("slot count outside length range");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    if (!s.box.valid() || s.box.x < 0 || s.box.y < 0 || s.box.right() > template_image.width() ||
        s.box.bottom() > template_image.height())
      fail("slot " + std::to_string(i) + " lies outside the template");
    if (s.alphabet.empty()) fail("slot " + std::to_string(i) + " has an empty alphabet");
    for (char c : s.alphabet)
      if (!is_char_class(c)) fail("slot " + std::to_string(i) + " alphabet holds '" + std::string(1, c) + "'");
    if (s.row < 0 || s.row >= rows) fail("slot " + std::to_string(i) + " row out of range");
  }
}

void GlyphAtlas::add(const LayoutClass& layout, char cls, Image glyph) {
  glyphs_[{layout.name(), cls}] = std::move(glyph);
}

bool GlyphAtlas::has(const LayoutClass& layout, char cls) const { return glyphs_.contains({layout.name(), cls}); }

const Image& GlyphAtlas::get(const LayoutClass& layout, char cls) const {
  const auto it = glyphs_.find({layout.name(), cls});
  if (it == glyphs_.end())
    throw Error(Errc::MissingGlyph, "no glyph for '" + std::string(1, cls) + "' in layout " + layout.name());
  return it->second;
}

std::uint64_t BalanceState::count(const LayoutClass& layout, std::size_t slot, char cls) const {
  const auto it = counts_.find({layout.name(), slot});
  if (it == counts_.end()) return 0;
  const auto c = it->second.find(cls);
  return c == it->second.end() ? 0 : c->second;
}

void BalanceState::increment(const LayoutClass& layout, std::size_t slot, char cls) {
  ++counts_[{layout.name(), slot}][cls];
}

std::string sample_sequence(const LayoutSpec& spec, BalanceState& state, std::uint64_t seed) {
  Rng rng(seed);
  std::string seq;
  seq.reserve(spec.slots.size());
  for (std::size_t i = 0; i < spec.slots.size(); ++i) {
    const auto& alphabet = spec.slots[i].alphabet;
    std::uint64_t least = std::numeric_limits<std::uint64_t>::max();
    std::string ties;
    for (char c : alphabet) {
      const auto n = state.count(spec.layout, i, c);
      if (n < least) {
        least = n;
        ties.assign(1, c);
      } else if (n == least && ties.find(c) == std::string::npos) {
        ties.push_back(c);
      }
    }
    const char pick = ties[rng.below(ties.size())];
    state.increment(spec.layout, i, pick);
    seq.push_back(pick);
  }
  return seq;
}

namespace {

void composite(Image& dst, const Image& src_rgba, int ox, int oy) {
  for (int y = 0; y < src_rgba.height(); ++y)
    for (int x = 0; x < src_rgba.width(); ++x) {
      if (!dst.contains(ox + x, oy + y)) continue;
      const auto* s = src_rgba.pixel(x, y);
      const int a = src_rgba.channels() == 4 ? s[3] : 255;
      if (a == 0) continue;
      auto* d = dst.pixel(ox + x, oy + y);
      for (int c = 0; c < 3; ++c) d[c] = static_cast<std::uint8_t>((s[c] * a + d[c] * (255 - a) + 127) / 255);
    }
}

}  // namespace

RenderedPlate render_plate(const LayoutSpec& spec, const std::string& sequence, const GlyphAtlas& atlas) {
  if (sequence.size() != spec.slots.size())
    throw Error(Errc::LengthMismatch, "sequence '" + sequence + "' has " + std::to_string(sequence.size()) +
                                          " characters for " + std::to_string(spec.slots.size()) + " slots");
  RenderedPlate out;
  out.image = to_rgb(spec.template_image);
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    const auto& slot = spec.slots[i];
    const Image& glyph = atlas.get(spec.layout, sequence[i]);
    const double scale = std::min(slot.box.w / glyph.width(), slot.box.h / glyph.height());
    const int gw = std::max(1, static_cast<int>(std::lround(glyph.width() * scale)));
    const int gh = std::max(1, static_cast<int>(std::lround(glyph.height() * scale)));
    const Image scaled = (gw == glyph.width() && gh == glyph.height()) ? glyph : resize_bilinear(glyph, gw, gh);
    const int ox = static_cast<int>(std::lround(slot.box.x + (slot.box.w - gw) / 2.0));
    const int oy = static_cast<int>(std::lround(slot.box.y + (slot.box.h - gh) / 2.0));
    composite(out.image, scaled, ox, oy);
    out.boxes.push_back({slot.box, sequence[i]});
  }
  return out;
}

std::vector<std::size_t> even_counts(std::size_t total, std::size_t n) {
  std::vector<std::size_t> counts(n, n ? total / n : 0);
  for (std::size_t i = 0; n && i < total % n; ++i) ++counts[i];
  return counts;
}

namespace {

std::string padded(std::size_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
}

}  // namespace

CorpusManifest generate_template_corpus(const std::vector<LayoutSpec>& specs, const GlyphAtlas& atlas,
                                        const TemplateCorpusOptions& options, const std::filesystem::path& out_dir) {
  if (specs.empty() || options.total < specs.size())
    throw Error(Errc::InvalidArgument, "need at least one plate per layout");
  options.augmentation.validate();
  for (const auto& s : specs) s.validate();

  struct Job {
    std::size_t layout;
    std::size_t index;
    std::string text;
  };
  std::vector<Job> jobs;
  const auto counts = even_counts(options.total, specs.size());
  BalanceState state;
  const std::uint64_t seed = options.augmentation.master_seed;
  for (std::size_t li = 0; li < specs.size(); ++li)
    for (std::size_t k = 0; k < counts[li]; ++k)
      jobs.push_back({li, k, sample_sequence(specs[li], state, mix_seed(seed, {0x7e3b1a7eULL, li, k}))});

  std::filesystem::create_directories(out_dir / "images");
  std::vector<ManifestEntry> entries(jobs.size());
  parallel_for(jobs.size(), options.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    const LayoutSpec& spec = specs[job.layout];
    const RenderedPlate plate = render_plate(spec, job.text, atlas);
    const AugmentedPlate aug = augment(plate.image, plate.boxes, options.augmentation, i);

    const std::string id = "template_" + spec.layout.name() + "_" + padded(job.index);
    const std::string rel = "images/" + id + ".png";
    write_png(out_dir / rel, aug.image);

    LpAnnotation ann;
    ann.dataset_id = options.dataset_id;
    ann.image_id = id;
    ann.layout = spec.layout;
    ann.corners = aug.quad;
    ann.text = job.text;
    ann.char_boxes = warp_char_boxes(plate.boxes, aug.warp, aug.image.width(), aug.image.height());
    ann.image_path = rel;
    ann.image_size = std::pair{aug.image.width(), aug.image.height()};
    validate(ann);
    entries[i] = {std::move(ann), Split::Train, Source::Template, std::nullopt};
  });

  CorpusManifest manifest{std::move(entries)};
  std::vector<LpAnnotation> anns;
  for (const auto& e : manifest.entries) anns.push_back(e.annotation);
  save_annotations(out_dir / "annotations.jsonl", anns);
  save_manifest(out_dir / "manifest.jsonl", manifest);
  return manifest;
}

namespace {

std::string glyph_file(char cls) { return cls == kWildcard ? "wildcard.png" : std::string(1, cls) + ".png"; }

}  // namespace

std::vector<LayoutSpec> load_layout_specs(const std::filesystem::path& dir, GlyphAtlas* atlas) {
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::IoError, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> layout_dirs;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_directory() && std::filesystem::exists(e.path() / "layout.json")) layout_dirs.push_back(e.path());
  std::sort(layout_dirs.begin(), layout_dirs.end());

  std::vector<LayoutSpec> specs;
  for (const auto& ld : layout_dirs) {
    std::ifstream in(ld / "layout.json");
    LayoutSpec spec;
    try {
      const json j = json::parse(in);
      spec.layout = LayoutClass(j.at("layout").get<std::string>());
      spec.template_image = to_rgb(read_png(ld / j.value("template", std::string("template.png"))));
      spec.rows = j.value("rows", 1);
      for (const auto& s : j.at("slots")) {
        const auto b = s.at("box").get<std::vector<double>>();
        if (b.size() != 4) throw Error(Errc::ParseError, "slot box must be [x, y, w, h]");
        spec.slots.push_back({{b[0], b[1], b[2], b[3]}, s.at("alphabet").get<std::string>(), s.value("row", 0)});
      }
      spec.min_length = j.value("min_length", spec.slots.size());
      spec.max_length = j.value("max_length", spec.slots.size());
    } catch (const json::exception& e) {
      throw Error(Errc::ParseError, (ld / "layout.json").string() + ": " + e.what());
    }
    spec.validate();
    if (atlas) {
      std::string classes;
      for (const auto& s : spec.slots)
        for (char c : s.alphabet)
          if (classes.find(c) == std::string::npos) classes.push_back(c);
      for (char c : classes) {
        const auto path = ld / "glyphs" / glyph_file(c);
        if (std::filesystem::exists(path)) atlas->add(spec.layout, c, read_png(path));
      }
    }
    specs.push_back(std::move(spec));
  }
  if (specs.empty()) throw Error(Errc::IoError, "no layout specs under " + dir.string());
  return specs;
}

void save_layout_specs(const std::filesystem::path& dir, const std::vector<LayoutSpec>& specs, const GlyphAtlas& atlas) {
  for (const auto& spec : specs) {
    const auto ld = dir / spec.layout.name();
    std::filesystem::create_directories(ld / "glyphs");
    write_png(ld / "template.png", spec.template_image);
    json j;
    j["layout"] = spec.layout.name();
    j["template"] = "template.png";
    j["rows"] = spec.rows;
    j["min_length"] = spec.min_length;
    j["max_length"] = spec.max_length;
    json slots = json::array();
    std::string classes;
    for (const auto& s : spec.slots) {
      slots.push_back({{"box", {s.box.x, s.box.y, s.box.w, s.box.h}}, {"alphabet", s.alphabet}, {"row", s.row}});
      for (char c : s.alphabet)
        if (classes.find(c) == std::string::npos) classes.push_back(c);
    }
    j["slots"] = std::move(slots);
    write_text(ld / "layout.json", j.dump(2) + "\n");
    for (char c : classes)
      if (atlas.has(spec.layout, c)) write_png(ld / "glyphs" / glyph_file(c), atlas.get(spec.layout, c));
  }
}

}  // namespace plateforge
