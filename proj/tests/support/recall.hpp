#pragma once

#include <cmath>
#include <cstddef>
#include <set>

#include "mcseg/imaging/clusters.hpp"
#include "mcseg/imaging/phantom.hpp"

namespace mcseg::testing {

/// A planted cluster is recalled when one reported region has member
/// components matching more than `more_than` of its planted MCs. A component
/// matches an MC when their centroids lie within `tolerance_px`.
inline bool cluster_recalled(const imaging::PhantomTruth& truth, std::size_t cluster,
                             const imaging::ClusterReport& report, double tolerance_px = 4.0,
                             std::size_t more_than = 5) {
  for (const imaging::ClusterRegion& region : report.regions) {
    std::set<std::size_t> matched;
    for (std::size_t m : truth.clusters.at(cluster).members) {
      const imaging::PlantedMc& mc = truth.mcs[m];
      for (std::size_t c : region.members) {
        const imaging::Component& comp = report.components[c];
        if (std::hypot(comp.centroid_x - mc.centroid_x, comp.centroid_y - mc.centroid_y) <= tolerance_px) {
          matched.insert(m);
        }
      }
    }
    if (matched.size() > more_than) return true;
  }
  return false;
}

}  // namespace mcseg::testing
