#include "mcseg/nn/init.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace mcseg::nn {

Tensor he_init(std::size_t fan_in, const Shape& shape, std::uint64_t seed) {
  if (fan_in == 0) throw std::invalid_argument("he_init: fan_in must be >= 1");
  Tensor out(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : out.values()) v = normal(rng);
  return out;
}

}  // namespace mcseg::nn
