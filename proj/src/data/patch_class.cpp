#include "mcseg/data/patch_class.hpp"

#include <algorithm>
#include <stdexcept>

namespace mcseg::data {

namespace {

void check_geometry(const BinaryMask& mask, Pixel center, std::size_t n) {
  if (n % 2 == 0 || n < 2 * kNearBand + 1) {
    throw std::invalid_argument("patch size must be odd and >= 7, got " + std::to_string(n));
  }
  if (center.x >= mask.width() || center.y >= mask.height()) throw std::invalid_argument("patch centre outside mask");
}

}  // namespace

const char* to_string(PatchClass c) noexcept {
  switch (c) {
    case PatchClass::C1: return "C1";
    case PatchClass::C2: return "C2";
    case PatchClass::C3: return "C3";
    case PatchClass::C4: return "C4";
  }
  return "?";
}

PatchClass parse_patch_class(const std::string& text) {
  for (PatchClass c : kAllClasses) {
    if (text == to_string(c)) return c;
  }
  throw std::invalid_argument("unknown patch class '" + text + "'");
}

const char* to_string(Target t) noexcept { return t == Target::Detector ? "detector" : "segmentator"; }

Target parse_target(const std::string& text) {
  if (text == "detector") return Target::Detector;
  if (text == "segmentator") return Target::Segmentator;
  throw std::invalid_argument("unknown target '" + text + "' (expected detector or segmentator)");
}

TargetLabels derive_labels(PatchClass c) noexcept { return {c != PatchClass::C4, c == PatchClass::C1}; }

bool is_positive(PatchClass c, Target t) noexcept {
  const TargetLabels l = derive_labels(c);
  return t == Target::Detector ? l.detector : l.segmentator;
}

std::vector<PatchClass> classes_for(Target t, bool positive) {
  std::vector<PatchClass> out;
  for (PatchClass c : kAllClasses) {
    if (is_positive(c, t) == positive) out.push_back(c);
  }
  return out;
}

PatchClass assign_patch_class(const BinaryMask& mask, Pixel center, std::size_t n) {
  check_geometry(mask, center, n);
  if (mask.at(center.x, center.y)) return PatchClass::C1;
  const std::size_t half = n / 2;
  bool near = false, inside = false;
  const std::size_t y0 = center.y >= half ? center.y - half : 0;
  const std::size_t x0 = center.x >= half ? center.x - half : 0;
  const std::size_t y1 = std::min(mask.height(), center.y + half + 1);
  const std::size_t x1 = std::min(mask.width(), center.x + half + 1);
  for (std::size_t y = y0; y < y1; ++y) {
    for (std::size_t x = x0; x < x1; ++x) {
      if (!mask.at(x, y)) continue;
      inside = true;
      const std::size_t dx = x > center.x ? x - center.x : center.x - x;
      const std::size_t dy = y > center.y ? y - center.y : center.y - y;
      if (std::max(dx, dy) <= kNearBand) near = true;
    }
  }
  if (near) return PatchClass::C2;
  return inside ? PatchClass::C3 : PatchClass::C4;
}

PatchClassifier::PatchClassifier(const BinaryMask& mask)
    : mask_(&mask), width_(mask.width()), height_(mask.height()), table_((mask.width() + 1) * (mask.height() + 1), 0) {
  const std::size_t stride = width_ + 1;
  for (std::size_t y = 0; y < height_; ++y) {
    std::uint32_t row = 0;
    for (std::size_t x = 0; x < width_; ++x) {
      row += mask.at(x, y) ? 1 : 0;
      table_[(y + 1) * stride + x + 1] = table_[y * stride + x + 1] + row;
    }
  }
}

std::size_t PatchClassifier::count_within(Pixel center, std::size_t r) const noexcept {
  const std::size_t stride = width_ + 1;
  const std::size_t y0 = center.y >= r ? center.y - r : 0;
  const std::size_t x0 = center.x >= r ? center.x - r : 0;
  const std::size_t y1 = std::min(height_, center.y + r + 1);
  const std::size_t x1 = std::min(width_, center.x + r + 1);
  return table_[y1 * stride + x1] + table_[y0 * stride + x0] - table_[y0 * stride + x1] - table_[y1 * stride + x0];
}

PatchClass PatchClassifier::classify(Pixel center, std::size_t n) const {
  check_geometry(*mask_, center, n);
  if (mask_->at(center.x, center.y)) return PatchClass::C1;
  if (count_within(center, kNearBand) > 0) return PatchClass::C2;
  return count_within(center, n / 2) > 0 ? PatchClass::C3 : PatchClass::C4;
}

}  // namespace mcseg::data
