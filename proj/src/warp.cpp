#include <cmath>

#include "plateforge/geometry.hpp"

namespace plateforge {

Image warp_image(const Image& img, const Homographyd& h, int out_width, int out_height, Rgb fill) {
  if (!h.invertible()) throw Error(Errc::SingularSystem, "warp homography is not invertible");
  const Homographyd inv = h.inverse();
  const int channels = img.channels();
  Image out(out_width, out_height, channels);
  const std::uint8_t fill_px[4] = {fill.r, fill.g, fill.b, 255};

  const double max_x = img.width() - 1.0;
  const double max_y = img.height() - 1.0;
  constexpr double kEdge = 1e-9;

  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const Point2d s = inv.apply(Point2d(x, y));
      auto* dst = out.pixel(x, y);
      if (!s.allFinite() || s.x() < -kEdge || s.y() < -kEdge || s.x() > max_x + kEdge || s.y() > max_y + kEdge) {
        for (int c = 0; c < channels; ++c) dst[c] = fill_px[c];
        continue;
      }
      const double sx = std::clamp(s.x(), 0.0, max_x);
      const double sy = std::clamp(s.y(), 0.0, max_y);
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const int y1 = std::min(y0 + 1, img.height() - 1);
      const double tx = sx - x0;
      const double ty = sy - y0;
      const auto* p00 = img.pixel(x0, y0);
      const auto* p10 = img.pixel(x1, y0);
      const auto* p01 = img.pixel(x0, y1);
      const auto* p11 = img.pixel(x1, y1);
      for (int c = 0; c < channels; ++c) {
        const double top = p00[c] + (p10[c] - p00[c]) * tx;
        const double bottom = p01[c] + (p11[c] - p01[c]) * tx;
        dst[c] = static_cast<std::uint8_t>(std::clamp(std::lround(top + (bottom - top) * ty), 0L, 255L));
      }
    }
  }
  return out;
}

Image warp_image(const Image& img, const Homographyd& h, const RectifiedFrame& out) {
  return warp_image(img, h, out.width, out.height, kGray);
}

Image rectify(const Image& img, const Quadd& plate) {
  const RectifiedFrame frame = rect_target_frame(plate);
  return warp_image(img, homography_from_quads(plate, frame.target), frame);
}

}  // namespace plateforge
