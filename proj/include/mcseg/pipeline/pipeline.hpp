#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcseg/arch/network.hpp"
#include "mcseg/imaging/clusters.hpp"
#include "mcseg/imaging/components.hpp"
#include "mcseg/imaging/image.hpp"

namespace mcseg::pipeline {

using imaging::BinaryMask;
using imaging::Box;
using imaging::GrayImage;
using imaging::Pixel;

struct PipelineConfig {
  /// A tile is skipped when more than this share of its pixels is Otsu background.
  double skip_background_fraction = 0.99;
  double threshold = 0.5;  // on the positive-class probability
  std::size_t batch = 256;
  std::size_t threads = 1;  // 0 = hardware concurrency
  imaging::ClusterConfig clusters;

  void validate() const;
};

struct Roi {
  Pixel origin;  // top-left corner of the N x N tile
  double probability = 0.0;
  friend bool operator==(const Roi&, const Roi&) = default;
};

struct RoiSet {
  std::size_t patch_size = 0;
  std::vector<Roi> rois;  // positive tiles in tile-grid order
  std::size_t tiles_total = 0;
  std::size_t tiles_evaluated = 0;  // tiles left after background exclusion

  Box box(const Roi& roi) const { return {roi.origin.x, roi.origin.y, roi.origin.x + patch_size, roi.origin.y + patch_size}; }
  friend bool operator==(const RoiSet&, const RoiSet&) = default;
};

struct SegmentationResult {
  std::vector<float> probability;  // row-major; 0 where not evaluated
  BinaryMask evaluated;
  BinaryMask mask;
  std::size_t evaluations = 0;  // network forward evaluations, one per evaluated pixel

  friend bool operator==(const SegmentationResult&, const SegmentationResult&) = default;
};

/// Tiles the image, drops tiles that are almost all Otsu background, and
/// classifies the rest. Throws std::invalid_argument when the weights were
/// built for a different N or the image is smaller than N.
RoiSet run_detector(const GrayImage& image, const arch::NetworkWeights<double>& detector, std::size_t n,
                    const PipelineConfig& config = {});

/// Evaluates every pixel of the union of the ROIs once, on its centred
/// reflection-padded patch, in raster order.
SegmentationResult run_segmentator(const GrayImage& image, const RoiSet& rois,
                                   const arch::NetworkWeights<double>& segmentator, std::size_t n,
                                   const PipelineConfig& config = {});

struct PipelineStats {
  std::size_t detector_evaluations = 0;
  std::size_t segmentator_evaluations = 0;
  double detector_seconds = 0.0;
  double segmentator_seconds = 0.0;
  double total_seconds = 0.0;

  std::size_t evaluations() const noexcept { return detector_evaluations + segmentator_evaluations; }
  double patches_per_second() const noexcept;
};

struct PipelineResult {
  RoiSet rois;
  SegmentationResult segmentation;
  imaging::ClusterReport report;
  PipelineStats stats;
};

/// Failure of one pipeline stage: "load", "detector", "segmentator",
/// "labeling" or "clustering".
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Detector, Segmentator, labeling and clustering. Errors are rethrown as
/// PipelineError naming the failing stage.
PipelineResult run_pipeline(const GrayImage& image, const arch::NetworkWeights<double>& detector,
                            const arch::NetworkWeights<double>& segmentator, std::size_t n,
                            const PipelineConfig& config = {});
PipelineResult run_pipeline(const GrayImage& image, const std::filesystem::path& detector_path,
                            const std::filesystem::path& segmentator_path, std::size_t n,
                            const PipelineConfig& config = {});

/// Labeling and clustering of a binary mask alone.
imaging::ClusterReport report_from_mask(const BinaryMask& mask, double spacing_mm,
                                        const imaging::ClusterConfig& config = {});

inline constexpr imaging::Rgb kMcTint{255, 40, 40};
inline constexpr imaging::Rgb kClusterOutline{255, 220, 0};

/// Grey base image (scaled to 8 bits), mask pixels painted kMcTint, cluster
/// boxes outlined in kClusterOutline on their border pixels.
imaging::RgbImage render_overlay(const GrayImage& image, const BinaryMask& mask, const imaging::ClusterReport& report);

}  // namespace mcseg::pipeline
