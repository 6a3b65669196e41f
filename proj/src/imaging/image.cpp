#include "mcseg/imaging/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mcseg::imaging {

namespace {

void require_dims(std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) {
    throw std::invalid_argument("image dimensions must be >= 1, got " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
}

}  // namespace

Box Box::united(const Box& o) const noexcept {
  return {std::min(x0, o.x0), std::min(y0, o.y0), std::max(x1, o.x1), std::max(y1, o.y1)};
}

GrayImage::GrayImage(std::size_t width, std::size_t height, std::uint16_t max_value, double spacing_mm,
                     std::uint16_t fill)
    : width_(width), height_(height), max_value_(max_value) {
  require_dims(width, height);
  if (max_value != 255 && max_value != 65535) {
    throw std::invalid_argument("max_value must be 255 or 65535, got " + std::to_string(max_value));
  }
  if (fill > max_value) throw std::invalid_argument("fill exceeds max_value");
  set_spacing_mm(spacing_mm);
  pixels_.assign(width * height, fill);
}

void GrayImage::set_spacing_mm(double spacing_mm) {
  if (!(spacing_mm > 0.0) || !std::isfinite(spacing_mm)) {
    throw std::invalid_argument("pixel spacing must be positive");
  }
  spacing_mm_ = spacing_mm;
}

BinaryMask::BinaryMask(std::size_t width, std::size_t height, bool fill) : width_(width), height_(height) {
  require_dims(width, height);
  bits_.assign(width * height, fill ? 1 : 0);
}

std::size_t BinaryMask::popcount() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

RgbImage::RgbImage(std::size_t width, std::size_t height, Rgb fill) : width_(width), height_(height) {
  require_dims(width, height);
  pixels_.assign(width * height, fill);
}

void require_same_size(const GrayImage& image, const BinaryMask& mask) {
  if (image.width() != mask.width() || image.height() != mask.height()) {
    throw std::invalid_argument("mask " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                                " does not match image " + std::to_string(image.width()) + "x" +
                                std::to_string(image.height()));
  }
}

}  // namespace mcseg::imaging
