#pragma once

// Template-based plate synthesis: balanced character sequences composited onto
// blank layout templates, then augmented.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "plateforge/augmentation.hpp"
#include "plateforge/corpus.hpp"
#include "plateforge/image.hpp"

namespace plateforge {

struct Slot {
  BBoxd box;
  /// Classes this position may hold, e.g. "ABCDEFGHIJKLMNOPQRSTUVWXYZ".
  std::string alphabet;
  int row = 0;
};

struct LayoutSpec {
  LayoutClass layout;
  Image template_image;
  int rows = 1;
  std::vector<Slot> slots;
  std::size_t min_length = 0;
  std::size_t max_length = 0;

  /// Throws ValidationError if a slot leaves the template, an alphabet is
  /// empty or holds a non-class character, or the slot count is out of range.
  void validate() const;
};

inline const std::string kLetters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
inline const std::string kDigits = "0123456789";

/// Per-layout, per-class glyph images with transparent backgrounds (RGBA).
class GlyphAtlas {
 public:
  void add(const LayoutClass& layout, char cls, Image glyph);
  bool has(const LayoutClass& layout, char cls) const;
  /// Throws MissingGlyph.
  const Image& get(const LayoutClass& layout, char cls) const;

 private:
  std::map<std::pair<std::string, char>, Image> glyphs_;
};

/// Usage counts per (layout, slot, class) for least-used-first sampling.
class BalanceState {
 public:
  std::uint64_t count(const LayoutClass& layout, std::size_t slot, char cls) const;
  void increment(const LayoutClass& layout, std::size_t slot, char cls);

 private:
  std::map<std::pair<std::string, std::size_t>, std::map<char, std::uint64_t>> counts_;
};

/// Draws one symbol per slot: the least-used class of that slot's alphabet,
/// ties broken uniformly at random from `seed`. Updates `state`.
std::string sample_sequence(const LayoutSpec& spec, BalanceState& state, std::uint64_t seed);

struct RenderedPlate {
  Image image;
  std::vector<CharBox> boxes;
};

/// Composites each glyph centered in its slot, scaled uniformly to fit.
/// The returned char boxes are the slot boxes.
RenderedPlate render_plate(const LayoutSpec& spec, const std::string& sequence, const GlyphAtlas& atlas);

struct TemplateCorpusOptions {
  std::size_t total = 0;
  AugmentationConfig augmentation;
  unsigned workers = 1;
  std::string dataset_id = "synthetic-template";
};

/// Renders `total` plates spread evenly over `specs` (remainder to the first
/// layouts in order), writes PNGs under out_dir/images plus annotations.jsonl
/// and manifest.jsonl. Output bytes do not depend on the worker count.
CorpusManifest generate_template_corpus(const std::vector<LayoutSpec>& specs, const GlyphAtlas& atlas,
                                        const TemplateCorpusOptions& options, const std::filesystem::path& out_dir);

/// Per-layout counts: floor(total / n) each, +1 for the first total % n.
std::vector<std::size_t> even_counts(std::size_t total, std::size_t n);

// Layout spec directories: <dir>/<Layout>/layout.json, template.png and
// glyphs/<class>.png ("wildcard.png" for '*').
std::vector<LayoutSpec> load_layout_specs(const std::filesystem::path& dir, GlyphAtlas* atlas = nullptr);
void save_layout_specs(const std::filesystem::path& dir, const std::vector<LayoutSpec>& specs, const GlyphAtlas& atlas);

/// The six built-in layouts with procedurally drawn templates.
std::vector<LayoutSpec> builtin_layout_specs();
/// A 5x7 block font for every class (plus a blurred blob for '*') for each built-in layout.
GlyphAtlas builtin_glyph_atlas();
/// One glyph of the built-in font, `scale` pixels per font cell.
Image builtin_glyph(char cls, int scale, Rgb ink);

}  // namespace plateforge
