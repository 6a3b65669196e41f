#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mcseg/imaging/image.hpp"

namespace mcseg::imaging {

struct Component {
  std::uint32_t label = 0;
  std::size_t area = 0;
  double centroid_x = 0.0;  // mean pixel coordinate
  double centroid_y = 0.0;
  Box bounds;
};

/// Label map plus per-component statistics. Label 0 is background; the
/// others run 1..K in raster order of each component's first pixel, and
/// components[k-1] describes label k.
struct LabeledRegions {
  std::size_t width = 0, height = 0;
  std::vector<std::uint32_t> labels;
  std::vector<Component> components;

  std::uint32_t at(std::size_t x, std::size_t y) const noexcept { return labels[y * width + x]; }
};

/// 8-connected component labeling.
LabeledRegions connected_components(const BinaryMask& mask);

}  // namespace mcseg::imaging
