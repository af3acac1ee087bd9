#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <string>

#include "plateforge/geometry.hpp"
#include "plateforge/image.hpp"
#include "plateforge/rng.hpp"

namespace plateforge::testing {

/// Convex, well-conditioned quad: a jittered rectangle.
inline Quadd random_quad(Rng& rng) {
  for (;;) {
    const double cx = rng.uniform(-200, 200), cy = rng.uniform(-200, 200);
    const double hw = rng.uniform(20, 150), hh = rng.uniform(10, 80);
    const double j = 0.3 * std::min(hw, hh);
    auto jit = [&] { return rng.uniform(-j, j); };
    const Quadd q{{cx - hw + jit(), cy - hh + jit()},
                  {cx + hw + jit(), cy - hh + jit()},
                  {cx + hw + jit(), cy + hh + jit()},
                  {cx - hw + jit(), cy + hh + jit()}};
    if (!is_degenerate(q, 1.0)) return q;
  }
}

inline BBoxd random_int_box(Rng& rng, int extent) {
  const auto x = static_cast<double>(rng.below(extent));
  const auto y = static_cast<double>(rng.below(extent));
  const auto w = static_cast<double>(1 + rng.below(extent / 2));
  const auto h = static_cast<double>(1 + rng.below(extent / 2));
  return {x, y, w, h};
}

/// IoU by counting unit cells covered by integer-aligned boxes.
inline double pixel_iou(const BBoxd& a, const BBoxd& b) {
  const int x0 = static_cast<int>(std::min(a.x, b.x)), y0 = static_cast<int>(std::min(a.y, b.y));
  const int x1 = static_cast<int>(std::max(a.right(), b.right())), y1 = static_cast<int>(std::max(a.bottom(), b.bottom()));
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= a.x && x < a.right() && y >= a.y && y < a.bottom();
      const bool in_b = x >= b.x && x < b.right() && y >= b.y && y < b.bottom();
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return uni ? static_cast<double>(inter) / uni : 0.0;
}

inline Image checkerboard(int w, int h, int cell) {
  Image img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool dark = ((x / cell) + (y / cell)) % 2 == 0;
      set_rgb(img, x, y, dark ? Rgb{20, 30, 40} : Rgb{230, 220, 210});
    }
  return img;
}

/// Warps with a mild perspective into a frame about 1.5x larger (the usual
/// upsampling direction of plate rectification) and back again; mean absolute
/// error over pixels at least 2 px from the border.
inline double warp_roundtrip_mae(const Image& src) {
  const double w = src.width() - 1.0, h = src.height() - 1.0;
  const Quadd from = axis_aligned_quad(0.0, 0.0, w, h);
  const Quadd to{{10, 5}, {w * 1.5 + 10, 20}, {w * 1.47 + 10, h * 1.53}, {5, h * 1.48}};
  const Homographyd fwd = homography_from_quads(from, to);
  const Image out = warp_image(src, fwd, static_cast<int>(w * 1.55) + 20, static_cast<int>(h * 1.55) + 20);
  const Image back = warp_image(out, fwd.inverse(), src.width(), src.height());
  double total = 0;
  long n = 0;
  for (int y = 2; y < src.height() - 2; ++y)
    for (int x = 2; x < src.width() - 2; ++x)
      for (int c = 0; c < 3; ++c) {
        total += std::abs(static_cast<int>(src.at(x, y, c)) - static_cast<int>(back.at(x, y, c)));
        ++n;
      }
  return total / n;
}

}  // namespace plateforge::testing
