#include "mcseg/imaging/patch.hpp"

#include <stdexcept>
#include <string>

namespace mcseg::imaging {

std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::size_t n) noexcept {
  if (n == 1) return 0;
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  const std::ptrdiff_t period = 2 * last;
  i %= period;
  if (i < 0) i += period;
  return i <= last ? i : period - i;
}

template <typename T>
void extract_patch_into(const GrayImage& image, Pixel center, std::size_t n, T* out) {
  if (n % 2 == 0) throw std::invalid_argument("patch size must be odd, got " + std::to_string(n));
  if (center.x >= image.width() || center.y >= image.height()) {
    throw std::invalid_argument("patch centre outside image");
  }
  const auto maxv = static_cast<T>(image.max_value());
  const auto half = static_cast<std::ptrdiff_t>(n / 2);
  const auto cx = static_cast<std::ptrdiff_t>(center.x);
  const auto cy = static_cast<std::ptrdiff_t>(center.y);
  const bool interior = cx >= half && cy >= half && cx + half < static_cast<std::ptrdiff_t>(image.width()) &&
                        cy + half < static_cast<std::ptrdiff_t>(image.height());
  for (std::ptrdiff_t dy = -half; dy <= half; ++dy) {
    const auto y = static_cast<std::size_t>(interior ? cy + dy : reflect_index(cy + dy, image.height()));
    const std::uint16_t* row = image.pixels().data() + y * image.width();
    for (std::ptrdiff_t dx = -half; dx <= half; ++dx) {
      const auto x = static_cast<std::size_t>(interior ? cx + dx : reflect_index(cx + dx, image.width()));
      *out++ = static_cast<T>(row[x]) / maxv;
    }
  }
}

template <typename T>
nn::BasicTensor<T> extract_patch(const GrayImage& image, Pixel center, std::size_t n) {
  nn::BasicTensor<T> patch({1, n, n});
  extract_patch_into(image, center, n, patch.data());
  return patch;
}

template void extract_patch_into<float>(const GrayImage&, Pixel, std::size_t, float*);
template void extract_patch_into<double>(const GrayImage&, Pixel, std::size_t, double*);
template nn::BasicTensor<float> extract_patch<float>(const GrayImage&, Pixel, std::size_t);
template nn::BasicTensor<double> extract_patch<double>(const GrayImage&, Pixel, std::size_t);

}  // namespace mcseg::imaging
