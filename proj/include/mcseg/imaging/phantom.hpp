#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "mcseg/imaging/image.hpp"

namespace mcseg::imaging {

/// Synthetic mammogram settings. Intensity-like fields are fractions of the
/// image's max value so 8- and 16-bit phantoms look alike.
struct PhantomConfig {
  std::size_t width = 256;
  std::size_t height = 256;
  std::uint16_t max_value = 255;
  double spacing_mm = kDefaultSpacingMm;

  std::size_t clusters = 1;
  std::size_t mcs_per_cluster = 8;
  double cluster_radius_px = 40.0;  // members fall inside this disc
  std::size_t scattered_mcs = 3;

  double mc_diameter_min = 3.0;  // pixels, within [2, 10]
  double mc_diameter_max = 8.0;
  double min_spacing_px = 0.0;   // between MC centres; 0 picks diameter_max + 6

  double mc_contrast = 0.30;     // peak brightness added by an MC
  double margin = 0.10;          // every mask pixel clears the local background by this much
  double noise_sigma = 0.02;
  double tissue_level = 0.40;
  double blob_amplitude = 0.10;
  std::size_t blob_count = 12;
  double border_level = 0.03;    // dark region outside the tissue

  std::uint64_t seed = 0;

  /// Throws std::invalid_argument for out-of-range fields.
  void validate() const;
};

struct PlantedMc {
  Pixel seed;                     // pixel the blob was grown from
  double centroid_x = 0.0, centroid_y = 0.0;
  std::size_t area = 0;           // mask pixels owned by this MC
  long cluster = -1;              // index into Phantom::clusters, -1 if scattered
};

struct PlantedCluster {
  Box bounds;                     // bounding box of member mask pixels
  std::vector<std::size_t> members;
};

struct PhantomTruth {
  std::vector<PlantedMc> mcs;
  std::vector<PlantedCluster> clusters;
};

struct Phantom {
  GrayImage image;
  BinaryMask mask;
  PhantomTruth truth;
  /// Smooth tissue intensity before MCs and noise; the margin guarantee is
  /// stated against this.
  std::vector<double> background;
};

class PhantomError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic in config (seed included). Throws PhantomError if the MCs
/// cannot be placed with the requested spacing inside the tissue.
Phantom generate_phantom(const PhantomConfig& config);

/// Plain-text truth: "mc id cx cy area cluster seed_x seed_y" and
/// "cluster id x0 y0 x1 y1 count" lines. Cluster -1 marks a scattered MC.
void write_sidecar(const PhantomTruth& truth, const std::filesystem::path& path);
PhantomTruth read_sidecar(const std::filesystem::path& path);

}  // namespace mcseg::imaging
