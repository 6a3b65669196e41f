#include "mcseg/imaging/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mcseg::imaging {

namespace {

std::vector<std::size_t> window_origins(std::size_t extent, std::size_t side, std::size_t stride) {
  if (side >= extent) return {0};
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o + side <= extent; o += stride) out.push_back(o);
  if (out.back() + side < extent) out.push_back(extent - side);
  return out;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t a) {
  while (parent[a] != a) a = parent[a] = parent[parent[a]];
  return a;
}

}  // namespace

std::size_t cluster_window_px(double spacing_mm, const ClusterConfig& config) {
  if (!(spacing_mm > 0.0)) throw std::invalid_argument("pixel spacing must be positive");
  if (!(config.window_mm > 0.0)) throw std::invalid_argument("cluster window must be positive");
  const double side = std::round(config.window_mm / spacing_mm);
  return std::max<std::size_t>(1, static_cast<std::size_t>(side));
}

ClusterReport detect_clusters(const LabeledRegions& regions, double spacing_mm, const ClusterConfig& config) {
  return detect_clusters(regions.components, regions.width, regions.height, spacing_mm, config);
}

ClusterReport detect_clusters(std::vector<Component> components, std::size_t width, std::size_t height,
                              double spacing_mm, const ClusterConfig& config) {
  if (config.stride_divisor == 0) throw std::invalid_argument("stride divisor must be >= 1");
  ClusterReport report;
  report.window_px = cluster_window_px(spacing_mm, config);
  report.components = std::move(components);
  const std::size_t side = report.window_px;
  const std::size_t stride = std::max<std::size_t>(1, side / config.stride_divisor);

  struct Flagged {
    Box box;
    std::vector<std::size_t> members;
  };
  std::vector<Flagged> flagged;
  for (std::size_t y0 : window_origins(height, side, stride)) {
    for (std::size_t x0 : window_origins(width, side, stride)) {
      const Box box{x0, y0, x0 + side, y0 + side};
      std::vector<std::size_t> inside;
      for (std::size_t i = 0; i < report.components.size(); ++i) {
        if (box.contains(report.components[i].centroid_x, report.components[i].centroid_y)) inside.push_back(i);
      }
      if (inside.size() > config.more_than) flagged.push_back({box, std::move(inside)});
    }
  }

  std::vector<std::size_t> parent(flagged.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t i = 0; i < flagged.size(); ++i) {
    for (std::size_t j = i + 1; j < flagged.size(); ++j) {
      if (flagged[i].box.overlaps(flagged[j].box)) {
        const std::size_t a = find_root(parent, i), b = find_root(parent, j);
        parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }

  // Regions come out in raster order of their first flagged window.
  std::vector<std::size_t> region_of(flagged.size(), SIZE_MAX);
  for (std::size_t i = 0; i < flagged.size(); ++i) {
    const std::size_t root = find_root(parent, i);
    if (region_of[root] == SIZE_MAX) {
      region_of[root] = report.regions.size();
      report.regions.push_back({flagged[i].box, {}});
    }
    ClusterRegion& region = report.regions[region_of[root]];
    region.box = region.box.united(flagged[i].box);
    region.members.insert(region.members.end(), flagged[i].members.begin(), flagged[i].members.end());
  }
  for (ClusterRegion& region : report.regions) {
    std::sort(region.members.begin(), region.members.end());
    region.members.erase(std::unique(region.members.begin(), region.members.end()), region.members.end());
  }
  return report;
}

std::string format_report(const ClusterReport& report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "components " << report.components.size() << '\n';
  for (std::size_t i = 0; i < report.components.size(); ++i) {
    const Component& c = report.components[i];
    out << "mc " << i << ' ' << c.centroid_x << ' ' << c.centroid_y << ' ' << c.area << '\n';
  }
  out << "clusters " << report.regions.size() << '\n';
  for (std::size_t i = 0; i < report.regions.size(); ++i) {
    const ClusterRegion& r = report.regions[i];
    out << "cluster " << i << ' ' << r.box.x0 << ' ' << r.box.y0 << ' ' << r.box.x1 << ' ' << r.box.y1 << ' '
        << r.members.size() << '\n';
  }
  return out.str();
}

}  // namespace mcseg::imaging
