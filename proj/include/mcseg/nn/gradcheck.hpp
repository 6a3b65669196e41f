#pragma once

#include <functional>
#include <span>
#include <vector>

namespace mcseg::nn {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central-difference gradient (f(x+h) - f(x-h)) / 2h, one coordinate at a time.
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::vector<double> point, double h);

/// max|a - b| / max(max|a|, max|b|, floor). The floor keeps all-zero
/// gradients from dividing by zero.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6);

}  // namespace mcseg::nn
