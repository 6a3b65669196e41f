#pragma once

#include <cstdint>
#include <stdexcept>

#include "mcseg/nn/tensor.hpp"

namespace mcseg::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Tensor m;
  Tensor v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_parameter(const Tensor& param, const AdamConfig& config = {});
};

class NonFiniteGradient : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// One bias-corrected Adam update. Throws NonFiniteGradient (leaving param and
/// state untouched) if any gradient entry is NaN or infinite.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr);

}  // namespace mcseg::nn
