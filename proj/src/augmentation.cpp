#include "plateforge/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "plateforge/rng.hpp"

namespace plateforge {

using nlohmann::json;

void AugmentationConfig::validate() const {
  auto check = [](const Range& r, const char* name, double max) {
    if (!(r.lo >= 0.0) || !(r.hi >= r.lo) || r.hi > max)
      throw Error(Errc::InvalidArgument, std::string(name) + " range must satisfy 0 <= lo <= hi <= " + std::to_string(max));
  };
  check(perspective_jitter, "perspective_jitter", 1.0);
  check(shadow_extent, "shadow_extent", 1.0);
  check(shadow_opacity, "shadow_opacity", 1.0);
  check(hue_shift_deg, "hue_shift_deg", 180.0);
  check(saturation_delta, "saturation_delta", 1.0);
  check(brightness_delta, "brightness_delta", 1.0);
  check(noise_sigma, "noise_sigma", 255.0);
  check(blur_sigma, "blur_sigma", 50.0);
  check(jpeg_quality, "jpeg_quality", 100.0);
}

AugmentationConfig AugmentationConfig::identity(std::uint64_t seed) {
  AugmentationConfig cfg;
  cfg.master_seed = seed;
  return cfg;
}

AugmentationConfig AugmentationConfig::defaults(std::uint64_t seed) {
  AugmentationConfig cfg;
  cfg.perspective_jitter = {0.0, 0.06};
  cfg.shadow_extent = {0.2, 0.6};
  cfg.shadow_opacity = {0.0, 0.45};
  cfg.hue_shift_deg = {0.0, 8.0};
  cfg.saturation_delta = {0.0, 0.25};
  cfg.brightness_delta = {0.0, 0.25};
  cfg.noise_sigma = {0.0, 6.0};
  cfg.blur_sigma = {0.0, 1.0};
  cfg.jpeg_quality = {55.0, 95.0};
  cfg.master_seed = seed;
  return cfg;
}

namespace {

constexpr const char* kRangeKeys[] = {"perspective_jitter", "shadow_extent",    "shadow_opacity",
                                      "hue_shift_deg",      "saturation_delta", "brightness_delta",
                                      "noise_sigma",        "blur_sigma",       "jpeg_quality"};

template <typename Cfg>
auto ranges(Cfg& c) {
  return std::array{&c.perspective_jitter, &c.shadow_extent,    &c.shadow_opacity,
                    &c.hue_shift_deg,      &c.saturation_delta, &c.brightness_delta,
                    &c.noise_sigma,        &c.blur_sigma,       &c.jpeg_quality};
}

}  // namespace

json to_json(const AugmentationConfig& cfg) {
  json j;
  const auto rs = ranges(cfg);
  for (std::size_t i = 0; i < rs.size(); ++i) j[kRangeKeys[i]] = {rs[i]->lo, rs[i]->hi};
  j["seed"] = cfg.master_seed;
  return j;
}

AugmentationConfig augmentation_from_json(const json& j) {
  AugmentationConfig cfg = AugmentationConfig::identity();
  try {
    auto rs = ranges(cfg);
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (!j.contains(kRangeKeys[i])) continue;
      const auto v = j[kRangeKeys[i]].get<std::vector<double>>();
      if (v.size() != 2) throw Error(Errc::ParseError, std::string(kRangeKeys[i]) + " must be [lo, hi]");
      *rs[i] = {v[0], v[1]};
    }
    cfg.master_seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

enum Stage : std::uint64_t { kPerspective = 1, kShadow, kColor, kNoise, kBlur, kJpeg };

double signed_magnitude(Rng& rng, const Range& r) {
  const double m = rng.uniform(r.lo, r.hi);
  return rng.coin() ? m : -m;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0;
  if (d <= 0) {
    h = 0;
  } else if (mx == r) {
    h = 60 * std::fmod((g - b) / d + 6, 6.0);
  } else if (mx == g) {
    h = 60 * ((b - r) / d + 2);
  } else {
    h = 60 * ((r - g) / d + 4);
  }
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double c = v * s;
  const double hp = std::fmod(h, 360.0) / 60.0;
  const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
  double r1 = 0, g1 = 0, b1 = 0;
  switch (static_cast<int>(hp)) {
    case 0: r1 = c; g1 = x; break;
    case 1: r1 = x; g1 = c; break;
    case 2: g1 = c; b1 = x; break;
    case 3: g1 = x; b1 = c; break;
    case 4: r1 = x; b1 = c; break;
    default: r1 = c; b1 = x; break;
  }
  const double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

void apply_shadow(Image& img, Rng& rng, double extent, double opacity) {
  // A slanted band spanning the plate height, covering `extent` of its width.
  const double w = img.width(), h = img.height();
  const double band = extent * w;
  const double slant = rng.uniform(-0.3, 0.3) * w;
  const double x0 = rng.uniform(-std::abs(slant), w - band + std::abs(slant));
  const Quadd poly{{x0, 0}, {x0 + band, 0}, {x0 + band + slant, h}, {x0 + slant, h}};
  const double keep = 1.0 - opacity;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (contains(poly, Point2d(x, y))) {
        auto* p = img.pixel(x, y);
        for (int c = 0; c < 3; ++c) p[c] = to_byte(p[c] * keep);
      }
}

void apply_color(Image& img, double hue, double sat, double bright) {
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      auto* p = img.pixel(x, y);
      double h, s, v;
      rgb_to_hsv(p[0] / 255.0, p[1] / 255.0, p[2] / 255.0, h, s, v);
      h = std::fmod(h + hue + 360.0, 360.0);
      s = std::clamp(s * (1 + sat), 0.0, 1.0);
      v = std::clamp(v * (1 + bright), 0.0, 1.0);
      double r, g, b;
      hsv_to_rgb(h, s, v, r, g, b);
      p[0] = to_byte(r * 255);
      p[1] = to_byte(g * 255);
      p[2] = to_byte(b * 255);
    }
}

void apply_noise(Image& img, Rng& rng, double sigma) {
  for (auto& byte : img.bytes()) byte = to_byte(byte + rng.normal() * sigma);
}

Image gaussian_blur(const Image& img, double sigma) {
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += kernel[i + radius] = std::exp(-(i * i) / (2 * sigma * sigma));
  for (auto& k : kernel) k /= sum;

  const int w = img.width(), h = img.height(), ch = img.channels();
  std::vector<double> tmp(static_cast<std::size_t>(w) * h * ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * img.at(std::clamp(x + i, 0, w - 1), y, c);
        tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = acc;
      }
  Image out(w, h, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * tmp[(static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x) * ch + c];
        out.at(x, y, c) = to_byte(acc);
      }
  return out;
}

}  // namespace

AugmentedPlate augment(const Image& input, const std::vector<CharBox>& /*boxes*/, const AugmentationConfig& cfg,
                       std::uint64_t sample_index) {
  cfg.validate();
  auto stage_rng = [&](Stage s) { return Rng(mix_seed(cfg.master_seed, {sample_index, s})); };

  AugmentedPlate out;
  out.image = to_rgb(input);
  const double w = out.image.width() - 1.0, h = out.image.height() - 1.0;
  const Quadd full = axis_aligned_quad(0.0, 0.0, w, h);
  out.quad = full;

  if (cfg.perspective_jitter.active()) {
    Rng rng = stage_rng(kPerspective);
    const double j = rng.uniform(cfg.perspective_jitter.lo, cfg.perspective_jitter.hi);
    Quadd moved = full;
    for (int i = 0; i < 4; ++i) {
      const double r = std::sqrt(rng.uniform());
      const double theta = rng.uniform(0.0, 2 * std::numbers::pi);
      moved[i].x() = std::clamp(full[i].x() + j * w * r * std::cos(theta), 0.0, w);
      moved[i].y() = std::clamp(full[i].y() + j * h * r * std::sin(theta), 0.0, h);
    }
    if (!is_degenerate(moved, 1.0)) {
      out.warp = homography_from_quads(full, moved);
      out.image = warp_image(out.image, out.warp, out.image.width(), out.image.height());
      out.quad = moved;
    }
  }

  if (cfg.shadow_extent.active() && cfg.shadow_opacity.active()) {
    Rng rng = stage_rng(kShadow);
    const double extent = rng.uniform(cfg.shadow_extent.lo, cfg.shadow_extent.hi);
    const double opacity = rng.uniform(cfg.shadow_opacity.lo, cfg.shadow_opacity.hi);
    apply_shadow(out.image, rng, extent, opacity);
  }

  if (cfg.hue_shift_deg.active() || cfg.saturation_delta.active() || cfg.brightness_delta.active()) {
    Rng rng = stage_rng(kColor);
    const double hue = signed_magnitude(rng, cfg.hue_shift_deg);
    const double sat = signed_magnitude(rng, cfg.saturation_delta);
    const double bright = signed_magnitude(rng, cfg.brightness_delta);
    apply_color(out.image, hue, sat, bright);
  }

  if (cfg.noise_sigma.active()) {
    Rng rng = stage_rng(kNoise);
    apply_noise(out.image, rng, rng.uniform(cfg.noise_sigma.lo, cfg.noise_sigma.hi));
  }

  if (cfg.blur_sigma.active()) {
    Rng rng = stage_rng(kBlur);
    const double sigma = rng.uniform(cfg.blur_sigma.lo, cfg.blur_sigma.hi);
    if (sigma >= 0.3) out.image = gaussian_blur(out.image, sigma);
  }

  if (cfg.jpeg_quality.active()) {
    Rng rng = stage_rng(kJpeg);
    const int quality = static_cast<int>(std::lround(rng.uniform(cfg.jpeg_quality.lo, cfg.jpeg_quality.hi)));
    out.image = jpeg_roundtrip(out.image, std::max(quality, 1));
  }
  return out;
}

std::vector<CharBox> warp_char_boxes(const std::vector<CharBox>& boxes, const Homographyd& h, int width, int height) {
  std::vector<CharBox> out;
  out.reserve(boxes.size());
  for (const auto& cb : boxes) {
    const auto& b = cb.box;
    const Quadd moved = h.apply(axis_aligned_quad(b.x, b.y, b.right(), b.bottom()));
    const Eigen::Matrix<double, 2, 4> m = moved.matrix();
    const double x0 = std::clamp(m.row(0).minCoeff(), 0.0, static_cast<double>(width));
    const double x1 = std::clamp(m.row(0).maxCoeff(), 0.0, static_cast<double>(width));
    const double y0 = std::clamp(m.row(1).minCoeff(), 0.0, static_cast<double>(height));
    const double y1 = std::clamp(m.row(1).maxCoeff(), 0.0, static_cast<double>(height));
    out.push_back({{x0, y0, std::max(x1 - x0, 1.0), std::max(y1 - y0, 1.0)}, cb.cls});
  }
  return out;
}

}  // namespace plateforge
