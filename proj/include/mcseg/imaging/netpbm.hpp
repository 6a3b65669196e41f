#pragma once

#include <filesystem>
#include <stdexcept>

#include "mcseg/imaging/image.hpp"

namespace mcseg::imaging {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary PGM (P5). 8-bit for maxval 255, big-endian 16-bit for maxval 65535.
/// Other maxvals are read and rescaled onto the nearer of the two depths.
/// Pixel spacing is not part of the format; the reader applies `spacing_mm`.
GrayImage read_pgm(const std::filesystem::path& path, double spacing_mm = kDefaultSpacingMm);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);

/// Masks travel as 8-bit PGM with 0 / 255; any nonzero sample reads as true.
BinaryMask read_mask_pgm(const std::filesystem::path& path);
void write_mask_pgm(const BinaryMask& mask, const std::filesystem::path& path);

/// Binary PPM (P6), 8 bits per channel.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

}  // namespace mcseg::imaging
