#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mcseg::imaging {

inline constexpr double kDefaultSpacingMm = 0.05;

struct Pixel {
  std::size_t x = 0;
  std::size_t y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Box {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  std::size_t width() const noexcept { return x1 - x0; }
  std::size_t height() const noexcept { return y1 - y0; }
  bool contains(double x, double y) const noexcept {
    return x >= static_cast<double>(x0) && x < static_cast<double>(x1) && y >= static_cast<double>(y0) &&
           y < static_cast<double>(y1);
  }
  bool overlaps(const Box& o) const noexcept { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
  Box united(const Box& o) const noexcept;
  friend bool operator==(const Box&, const Box&) = default;
};

/// Grayscale intensities stored as 16-bit words whatever the source depth;
/// `max_value` (255 or 65535) records the depth and normalizes patches to [0,1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(std::size_t width, std::size_t height, std::uint16_t max_value = 255,
            double spacing_mm = kDefaultSpacingMm, std::uint16_t fill = 0);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return pixels_.size(); }
  std::uint16_t max_value() const noexcept { return max_value_; }
  double spacing_mm() const noexcept { return spacing_mm_; }
  void set_spacing_mm(double spacing_mm);

  std::uint16_t& at(std::size_t x, std::size_t y) noexcept { return pixels_[y * width_ + x]; }
  std::uint16_t at(std::size_t x, std::size_t y) const noexcept { return pixels_[y * width_ + x]; }
  std::vector<std::uint16_t>& pixels() noexcept { return pixels_; }
  const std::vector<std::uint16_t>& pixels() const noexcept { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t width_ = 0, height_ = 0;
  std::uint16_t max_value_ = 255;
  double spacing_mm_ = kDefaultSpacingMm;
  std::vector<std::uint16_t> pixels_;
};

/// One flag per pixel; true marks a microcalcification.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t width, std::size_t height, bool fill = false);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool at(std::size_t x, std::size_t y) const noexcept { return bits_[y * width_ + x] != 0; }
  void set(std::size_t x, std::size_t y, bool value = true) noexcept { bits_[y * width_ + x] = value ? 1 : 0; }
  std::size_t popcount() const noexcept;
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t width_ = 0, height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(std::size_t width, std::size_t height, Rgb fill = {});

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  Rgb& at(std::size_t x, std::size_t y) noexcept { return pixels_[y * width_ + x]; }
  const Rgb& at(std::size_t x, std::size_t y) const noexcept { return pixels_[y * width_ + x]; }
  const std::vector<Rgb>& pixels() const noexcept { return pixels_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t width_ = 0, height_ = 0;
  std::vector<Rgb> pixels_;
};

/// Throws std::invalid_argument unless the mask has the image's dimensions.
void require_same_size(const GrayImage& image, const BinaryMask& mask);

}  // namespace mcseg::imaging
