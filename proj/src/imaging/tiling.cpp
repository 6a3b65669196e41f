#include "mcseg/imaging/tiling.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mcseg::imaging {

std::vector<std::size_t> axis_origins(std::size_t extent, std::size_t n) {
  if (n == 0 || n > extent) {
    throw std::invalid_argument("tile size " + std::to_string(n) + " does not fit extent " + std::to_string(extent));
  }
  const std::size_t stride = std::max<std::size_t>(n / 2, 1);
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + n <= extent; o += stride) out.push_back(o);
  if (out.back() + n < extent) out.push_back(extent - n);
  return out;
}

TileGrid tile_image(std::size_t width, std::size_t height, std::size_t n) {
  TileGrid grid;
  grid.patch_size = n;
  grid.stride = std::max<std::size_t>(n / 2, 1);
  grid.x_origins = axis_origins(width, n);
  grid.y_origins = axis_origins(height, n);
  grid.origins.reserve(grid.x_origins.size() * grid.y_origins.size());
  for (std::size_t y : grid.y_origins) {
    for (std::size_t x : grid.x_origins) grid.origins.push_back({x, y});
  }
  return grid;
}

TileGrid tile_image(const GrayImage& image, std::size_t n) { return tile_image(image.width(), image.height(), n); }

}  // namespace mcseg::imaging
