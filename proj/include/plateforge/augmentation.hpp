#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plateforge/corpus.hpp"
#include "plateforge/geometry.hpp"
#include "plateforge/image.hpp"

namespace plateforge {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool active() const { return hi > 0.0; }
  friend bool operator==(const Range&, const Range&) = default;
};

/// Sampling ranges for the plate augmentation chain. A stage whose range has
/// hi == 0 is skipped, so the all-zero config is the identity.
///
/// Stages run in a fixed order: perspective, shadow, color jitter, noise, blur,
/// JPEG compression.
struct AugmentationConfig {
  /// Max corner displacement as a fraction of plate width/height.
  Range perspective_jitter;
  /// Fraction of the plate darkened by a random polygon, and how dark it gets.
  Range shadow_extent;
  Range shadow_opacity;
  /// Hue rotation in degrees; saturation/brightness as relative deltas.
  /// Magnitudes are drawn from the range and the sign is random.
  Range hue_shift_deg;
  Range saturation_delta;
  Range brightness_delta;
  /// Gaussian noise standard deviation in intensity levels.
  Range noise_sigma;
  /// Gaussian blur sigma in pixels.
  Range blur_sigma;
  /// JPEG quality (1-100).
  Range jpeg_quality;
  std::uint64_t master_seed = 0;

  void validate() const;

  static AugmentationConfig identity(std::uint64_t seed = 0);
  static AugmentationConfig defaults(std::uint64_t seed = 0);

  friend bool operator==(const AugmentationConfig&, const AugmentationConfig&) = default;
};

nlohmann::json to_json(const AugmentationConfig& cfg);
AugmentationConfig augmentation_from_json(const nlohmann::json& j);

struct AugmentedPlate {
  Image image;
  /// Where the plate's full-image corners landed.
  Quadd quad;
  /// Source-to-output plate mapping, for moving char boxes.
  Homographyd warp;
};

/// Runs the chain on one plate image. Deterministic in (cfg, sample_index):
/// the per-sample stream is seeded from mix(master_seed, sample_index).
AugmentedPlate augment(const Image& img, const std::vector<CharBox>& boxes, const AugmentationConfig& cfg,
                       std::uint64_t sample_index);

/// Enclosing boxes of char boxes after the augmentation warp, clipped to the canvas.
std::vector<CharBox> warp_char_boxes(const std::vector<CharBox>& boxes, const Homographyd& h, int width, int height);

}  // namespace plateforge
