#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mcseg/imaging/components.hpp"
#include "mcseg/imaging/image.hpp"

namespace mcseg::imaging {

struct ClusterConfig {
  double window_mm = 10.0;   // 1 cm side, i.e. 1 cm^2 windows
  std::size_t more_than = 5; // flag a window holding strictly more centroids than this
  std::size_t stride_divisor = 4;
};

struct ClusterRegion {
  Box box;                      // union of the merged flagged windows
  std::vector<std::size_t> members;  // indices into ClusterReport::components
};

struct ClusterReport {
  std::vector<Component> components;
  std::vector<ClusterRegion> regions;
  std::size_t window_px = 0;
};

/// Window side in pixels: round(window_mm / spacing_mm), at least 1.
std::size_t cluster_window_px(double spacing_mm, const ClusterConfig& config = {});

/// Slides the cluster window over a width x height image with stride
/// window/divisor (last origin clamped to the border), flags every window
/// holding more than `more_than` centroids (half-open window bounds), and
/// merges flagged windows whose interiors overlap.
ClusterReport detect_clusters(const LabeledRegions& regions, double spacing_mm, const ClusterConfig& config = {});

/// Same rule over bare components, for callers without a label map.
ClusterReport detect_clusters(std::vector<Component> components, std::size_t width, std::size_t height,
                              double spacing_mm, const ClusterConfig& config = {});

/// Structured text: one line per component, then one per cluster box.
std::string format_report(const ClusterReport& report);

}  // namespace mcseg::imaging
