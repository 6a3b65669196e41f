#pragma once

#include <cstdint>

#include "mcseg/imaging/image.hpp"

namespace mcseg::imaging {

struct OtsuResult {
  std::uint16_t threshold = 0;
  /// True for a constant image: no split exists and the foreground is empty.
  bool degenerate = false;
};

/// Histogram threshold maximizing between-class variance. Foreground is
/// intensity > threshold; among equally good thresholds the lowest wins.
OtsuResult otsu_threshold(const GrayImage& image);

/// Pixels strictly above `threshold`.
BinaryMask threshold_mask(const GrayImage& image, std::uint16_t threshold);

}  // namespace mcseg::imaging
