#pragma once

#include <cstddef>
#include <cstdint>

#include "mcseg/imaging/image.hpp"
#include "mcseg/nn/tensor.hpp"

namespace mcseg::imaging {

/// Mirror index without repeating the edge sample (... 2 1 | 0 1 2 ... n-1 | n-2 ...).
/// Folds repeatedly, so any offset maps into [0, n).
std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::size_t n) noexcept;

/// N x N window centred on `center`, intensities divided by the image's
/// max value, borders filled by reflection. Writes N*N values to `out`.
/// Throws std::invalid_argument for even N or a centre outside the image.
template <typename T>
void extract_patch_into(const GrayImage& image, Pixel center, std::size_t n, T* out);

/// As extract_patch_into, returned as a 1 x N x N tensor.
template <typename T = double>
nn::BasicTensor<T> extract_patch(const GrayImage& image, Pixel center, std::size_t n);

}  // namespace mcseg::imaging
