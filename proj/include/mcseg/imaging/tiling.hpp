#pragma once

#include <cstddef>
#include <vector>

#include "mcseg/imaging/image.hpp"

namespace mcseg::imaging {

/// N x N tiles overlapping by half a tile. Origins are top-left corners.
struct TileGrid {
  std::size_t patch_size = 0;
  std::size_t stride = 0;
  std::vector<std::size_t> x_origins;
  std::vector<std::size_t> y_origins;
  /// Row-major product of y_origins and x_origins.
  std::vector<Pixel> origins;

  Box tile(std::size_t i) const {
    const Pixel& o = origins.at(i);
    return {o.x, o.y, o.x + patch_size, o.y + patch_size};
  }
};

/// Multiples of floor(n/2) that fit, then one origin clamped to the far
/// border if the last multiple leaves pixels uncovered.
std::vector<std::size_t> axis_origins(std::size_t extent, std::size_t n);

/// Throws std::invalid_argument if n is 0 or exceeds either dimension.
TileGrid tile_image(std::size_t width, std::size_t height, std::size_t n);
TileGrid tile_image(const GrayImage& image, std::size_t n);

}  // namespace mcseg::imaging
