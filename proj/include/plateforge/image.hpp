#pragma once

#include <cassert>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace plateforge {

/// Interleaved 8-bit image, row-major. Channels is 3 (RGB) or 4 (RGBA).
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, std::uint8_t fill = 0)
      : width_(width), height_(height), channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {}

  static Image filled(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    Image img(width, height, 3);
    for (std::size_t i = 0; i < img.data_.size(); i += 3) {
      img.data_[i] = r;
      img.data_[i + 1] = g;
      img.data_[i + 2] = b;
    }
    return img;
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::uint8_t* pixel(int x, int y) noexcept {
    assert(contains(x, y));
    return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * channels_;
  }
  const std::uint8_t* pixel(int x, int y) const noexcept {
    assert(contains(x, y));
    return data_.data() + (static_cast<std::size_t>(y) * width_ + x) * channels_;
  }

  std::uint8_t& at(int x, int y, int c) noexcept { return pixel(x, y)[c]; }
  std::uint8_t at(int x, int y, int c) const noexcept { return pixel(x, y)[c]; }

  std::span<std::uint8_t> bytes() noexcept { return data_; }
  std::span<const std::uint8_t> bytes() const noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 3;
  std::vector<std::uint8_t> data_;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend auto operator<=>(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kBlack{0, 0, 0};
/// Fill for everything outside a plate: warp borders and GAN target backgrounds.
inline constexpr Rgb kGray{127, 127, 127};

inline Rgb get_rgb(const Image& img, int x, int y) {
  const auto* p = img.pixel(x, y);
  return {p[0], p[1], p[2]};
}

inline void set_rgb(Image& img, int x, int y, Rgb c) {
  auto* p = img.pixel(x, y);
  p[0] = c.r;
  p[1] = c.g;
  p[2] = c.b;
}

/// Drops alpha (composited over `background`) or returns a copy for RGB input.
Image to_rgb(const Image& img, Rgb background = {255, 255, 255});

/// Copy of the pixel rectangle [x, x+w) x [y, y+h); must lie inside the image.
Image crop(const Image& img, int x, int y, int w, int h);

/// Bilinear resize (pixel-center aligned).
Image resize_bilinear(const Image& img, int width, int height);

/// Pastes `src` with its top-left at (x, y), clipping to the destination.
void paste(Image& dst, const Image& src, int x, int y);

// PNG via libpng. Output bytes are deterministic for identical pixels.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);
Image read_jpeg(const std::filesystem::path& path);
void write_jpeg(const std::filesystem::path& path, const Image& img, int quality = 95);
/// PNG or JPEG, chosen by file extension.
Image read_image(const std::filesystem::path& path);

/// Lossy JPEG encode/decode round-trip in memory (RGB only).
Image jpeg_roundtrip(const Image& img, int quality);

}  // namespace plateforge
