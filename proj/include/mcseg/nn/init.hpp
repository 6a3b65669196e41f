#pragma once

#include <cstddef>
#include <cstdint>

#include "mcseg/nn/tensor.hpp"

namespace mcseg::nn {

/// Zero-mean Gaussian entries with variance 2/fan_in, deterministic in `seed`.
Tensor he_init(std::size_t fan_in, const Shape& shape, std::uint64_t seed);

}  // namespace mcseg::nn
