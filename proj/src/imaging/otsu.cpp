#include "mcseg/imaging/otsu.hpp"

#include <bit>
#include <vector>

namespace mcseg::imaging {

namespace {

using i128 = __int128;

// Between-class variance for a split with n0 pixels (sum s0) at or below t is
//   sigma^2 = (N*s0 - n0*S)^2 / (N^2 * n0 * n1),
// so candidates compare on d^2 / (n0*n1) with d = N*s0 - n0*S, all integers.
struct Candidate {
  i128 d = 0;
  i128 n0n1 = 0;  // 0 marks an empty class (variance 0)
};

// a > b on the exact rational d^2/(n0n1). `exact` is false when the products
// could overflow 128 bits; long double then carries the comparison.
bool better(const Candidate& a, const Candidate& b, bool exact) {
  if (a.n0n1 == 0) return false;
  if (b.n0n1 == 0) return a.d != 0;
  if (exact) return a.d * a.d * b.n0n1 > b.d * b.d * a.n0n1;
  const long double va = static_cast<long double>(a.d) * static_cast<long double>(a.d) / static_cast<long double>(a.n0n1);
  const long double vb = static_cast<long double>(b.d) * static_cast<long double>(b.d) / static_cast<long double>(b.n0n1);
  return va > vb;
}

}  // namespace

OtsuResult otsu_threshold(const GrayImage& image) {
  const std::size_t levels = static_cast<std::size_t>(image.max_value()) + 1;
  std::vector<std::uint64_t> hist(levels, 0);
  std::uint64_t total_sum = 0;
  for (std::uint16_t v : image.pixels()) {
    ++hist[v];
    total_sum += v;
  }
  const std::uint64_t n = image.pixel_count();

  // |d| < N^2 * maxval and n0*n1 <= N^2 / 4: keep d^2 * n0n1 under 2^126.
  const int n_bits = std::bit_width(n);
  const int d_bits = 2 * n_bits + std::bit_width(static_cast<std::uint64_t>(image.max_value()));
  const bool exact = 2 * d_bits + 2 * n_bits <= 126;

  Candidate best;
  std::uint16_t best_t = 0;
  bool found = false;
  std::uint64_t n0 = 0, s0 = 0;
  for (std::size_t t = 0; t < levels; ++t) {
    n0 += hist[t];
    s0 += hist[t] * t;
    const std::uint64_t n1 = n - n0;
    Candidate c;
    if (n0 != 0 && n1 != 0) {
      c.d = static_cast<i128>(n) * s0 - static_cast<i128>(n0) * total_sum;
      c.n0n1 = static_cast<i128>(n0) * n1;
    }
    if (better(c, best, exact)) {
      best = c;
      best_t = static_cast<std::uint16_t>(t);
      found = true;
    }
  }
  if (!found) {
    // Constant image: every split is empty or has zero variance.
    return {image.pixels().empty() ? std::uint16_t{0} : image.pixels().front(), true};
  }
  return {best_t, false};
}

BinaryMask threshold_mask(const GrayImage& image, std::uint16_t threshold) {
  BinaryMask mask(image.width(), image.height());
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) mask.set(x, y, image.at(x, y) > threshold);
  }
  return mask;
}

}  // namespace mcseg::imaging
