#pragma once

// Paired-data preparation for mask-to-plate image translation: class color
// palette, segmentation masks, AB pair export and confidence filtering of
// generated plates.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plateforge/corpus.hpp"
#include "plateforge/image.hpp"
#include "plateforge/synth_template.hpp"

namespace plateforge {

struct Lab {
  double l = 0, a = 0, b = 0;
};

/// sRGB (D65) to CIE L*a*b*.
Lab to_lab(Rgb c) noexcept;
/// CIE76 distance.
double lab_distance(const Lab& p, const Lab& q) noexcept;
inline double lab_distance(Rgb p, Rgb q) noexcept { return lab_distance(to_lab(p), to_lab(q)); }

/// Palette key of a character class ("A", "7", "*") or layout (its name).
std::string class_key(char cls);
std::string layout_key(const LayoutClass& layout);
/// Every character class plus the given layouts.
std::vector<std::string> palette_keys(const std::vector<LayoutClass>& layouts);
/// Colors published for a few classes, pinned by default.
const std::map<std::string, Rgb>& published_anchor_colors();

struct ClassPalette {
  std::map<std::string, Rgb> colors;
  double min_pairwise_dist = 0;
  double black_exclusion_dist = 0;

  /// Throws MissingClassColor.
  Rgb color_of(const std::string& key) const;
  std::optional<std::string> key_of(Rgb c) const;
  /// Throws ValidationError when a color repeats, sits closer than
  /// black_exclusion_dist to black, or two colors are nearer than min_pairwise_dist.
  void validate() const;
};

nlohmann::json to_json(const ClassPalette& p);
ClassPalette palette_from_json(const nlohmann::json& j);

/// Greedy farthest-point selection in Lab over a 32-level-per-channel RGB
/// gamut, with black as a fixed reference. Anchors present in `keys` are
/// pinned first; the seed only orders candidates for tie-breaking.
/// min_pairwise_dist is set to the achieved minimum. Throws InfeasiblePalette.
ClassPalette generate_palette(const std::vector<std::string>& keys, std::uint64_t seed, double black_exclusion_dist,
                              const std::map<std::string, Rgb>& anchors = published_anchor_colors());

/// Black background, plate quad in the layout color, char boxes (pixels
/// x <= i < x + w) in class colors on top. Throws MissingClassColor.
Image render_mask(const LpAnnotation& ann, const ClassPalette& palette, int width, int height);

struct DecodedMask {
  LayoutClass layout;
  std::vector<CharBox> boxes;
  std::string text() const;
};

/// Layout = most frequent layout color; boxes = 4-connected components of
/// class colors in reading order (rows by vertical overlap, then left to
/// right). Throws UnknownColor, NoPlateRegion.
DecodedMask decode_mask(const Image& mask, const ClassPalette& palette);

struct PairOptions {
  int width = 256;
  int height = 256;
  /// Crop margin around the plate's enclosing box, as a fraction of its size.
  double margin = 0.05;
  unsigned workers = 1;
};

/// Maps an annotation into the pair canvas: the plate's enclosing box plus
/// margin is stretched over width x height.
LpAnnotation to_pair_frame(const LpAnnotation& ann, const PairOptions& options);

/// Writes one side-by-side AB image per entry under out_dir/pairs (left: mask,
/// right: plate with everything outside the quad set to gray) and
/// out_dir/index.jsonl. Returns the number of pairs.
std::size_t export_pairs(const CorpusManifest& manifest, const std::filesystem::path& manifest_path,
                         const ClassPalette& palette, const std::filesystem::path& out_dir,
                         const PairOptions& options = {});

/// Masks of random balanced sequences over `specs` for feeding a trained
/// generator: out_dir/masks/*.png and out_dir/annotations.jsonl holding the
/// intended texts. Returns the number of masks.
std::size_t sample_generation_masks(const std::vector<LayoutSpec>& specs, const ClassPalette& palette,
                                    std::size_t total, std::uint64_t seed, const std::filesystem::path& out_dir,
                                    const PairOptions& options = {});

struct GanCandidate {
  std::string image_id;
  LayoutClass layout;
  std::string intended_text;
  std::string ocr_text;
  double ocr_confidence = 0;

  friend bool operator==(const GanCandidate&, const GanCandidate&) = default;
};

nlohmann::json to_json(const GanCandidate& c);
GanCandidate gan_candidate_from_json(const nlohmann::json& j);
std::vector<GanCandidate> load_gan_candidates(const std::filesystem::path& path);
void save_gan_candidates(const std::filesystem::path& path, const std::vector<GanCandidate>& candidates);

/// Per layout: optionally keep ocr_text == intended_text, sort by confidence
/// descending then image id ascending, take the first n. Warns when a layout
/// has fewer than n.
std::vector<GanCandidate> filter_top_n(const std::vector<GanCandidate>& candidates, std::size_t n_per_layout,
                                       bool require_text_match = true);

}  // namespace plateforge
