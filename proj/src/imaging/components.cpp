#include "mcseg/imaging/components.hpp"

#include <numeric>

namespace mcseg::imaging {

namespace {

class DisjointSets {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a < b) parent_[b] = a;
    else if (b < a) parent_[a] = b;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

LabeledRegions connected_components(const BinaryMask& mask) {
  const std::size_t w = mask.width(), h = mask.height();
  LabeledRegions out;
  out.width = w;
  out.height = h;
  out.labels.assign(w * h, 0);

  // First pass: provisional labels (1-based) from the already-visited
  // W, NW, N and NE neighbours.
  DisjointSets sets;
  sets.make();  // slot 0 = background
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      std::uint32_t found = 0;
      auto visit = [&](std::size_t nx, std::size_t ny) {
        const std::uint32_t l = out.labels[ny * w + nx];
        if (l == 0) return;
        if (found == 0) found = l;
        else sets.unite(found, l);
      };
      if (x > 0) visit(x - 1, y);
      if (y > 0) {
        if (x > 0) visit(x - 1, y - 1);
        visit(x, y - 1);
        if (x + 1 < w) visit(x + 1, y - 1);
      }
      out.labels[y * w + x] = found != 0 ? found : sets.make();
    }
  }

  // Second pass: resolve roots and renumber 1..K in order of first appearance.
  std::vector<std::uint32_t> final_label;
  std::vector<double> sum_x, sum_y;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::uint32_t& l = out.labels[y * w + x];
      if (l == 0) continue;
      const std::uint32_t root = sets.find(l);
      if (root >= final_label.size()) final_label.resize(root + 1, 0);
      if (final_label[root] == 0) {
        final_label[root] = static_cast<std::uint32_t>(out.components.size() + 1);
        Component c;
        c.label = final_label[root];
        c.bounds = {x, y, x + 1, y + 1};
        out.components.push_back(c);
        sum_x.push_back(0.0);
        sum_y.push_back(0.0);
      }
      l = final_label[root];
      Component& c = out.components[l - 1];
      ++c.area;
      sum_x[l - 1] += static_cast<double>(x);
      sum_y[l - 1] += static_cast<double>(y);
      c.bounds = c.bounds.united({x, y, x + 1, y + 1});
    }
  }
  for (std::size_t k = 0; k < out.components.size(); ++k) {
    Component& c = out.components[k];
    c.centroid_x = sum_x[k] / static_cast<double>(c.area);
    c.centroid_y = sum_y[k] / static_cast<double>(c.area);
  }
  return out;
}

}  // namespace mcseg::imaging
