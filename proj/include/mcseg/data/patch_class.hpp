#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mcseg/imaging/image.hpp"

namespace mcseg::data {

using imaging::BinaryMask;
using imaging::Pixel;

/// C1: MC at the centre. C2: nearest MC pixel within Chebyshev distance 3.
/// C3: an MC elsewhere in the patch. C4: no MC in the patch.
enum class PatchClass : std::uint8_t { C1 = 0, C2 = 1, C3 = 2, C4 = 3 };

inline constexpr std::array<PatchClass, 4> kAllClasses{PatchClass::C1, PatchClass::C2, PatchClass::C3,
                                                       PatchClass::C4};
inline constexpr std::size_t kNearBand = 3;

constexpr std::size_t index_of(PatchClass c) noexcept { return static_cast<std::size_t>(c); }
const char* to_string(PatchClass c) noexcept;
/// Accepts "C1".."C4"; throws std::invalid_argument otherwise.
PatchClass parse_patch_class(const std::string& text);

enum class Target { Detector, Segmentator };
const char* to_string(Target t) noexcept;
Target parse_target(const std::string& text);

struct TargetLabels {
  bool detector = false;
  bool segmentator = false;
  friend bool operator==(const TargetLabels&, const TargetLabels&) = default;
};

/// Detector: positive for C1-C3. Segmentator: positive for C1 only.
TargetLabels derive_labels(PatchClass c) noexcept;
bool is_positive(PatchClass c, Target t) noexcept;

/// Classes on the positive (or negative) side of a target, in C1..C4 order.
std::vector<PatchClass> classes_for(Target t, bool positive);

/// Class of the N x N patch centred at `center`. Reflection padding only ever
/// repeats pixels that already lie inside the window, so the window clipped
/// to the image decides. Throws for even N, N < 7, or a centre outside the mask.
PatchClass assign_patch_class(const BinaryMask& mask, Pixel center, std::size_t n);

/// Constant-time classification from a summed-area table of the mask.
class PatchClassifier {
 public:
  explicit PatchClassifier(const BinaryMask& mask);
  PatchClass classify(Pixel center, std::size_t n) const;
  /// MC pixels in the clipped window of half-size r around `center`.
  std::size_t count_within(Pixel center, std::size_t r) const noexcept;

 private:
  const BinaryMask* mask_;
  std::size_t width_, height_;
  std::vector<std::uint32_t> table_;  // (w+1) x (h+1)
};

}  // namespace mcseg::data
