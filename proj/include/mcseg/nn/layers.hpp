#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mcseg/nn/tensor.hpp"

namespace mcseg::nn {

enum class ConvMode { Valid, Same };
enum class Phase { Train, Infer };

/// How a 2x2/stride-2 pool treats an odd trailing row or column.
/// Floor drops it; Ceil keeps a partial window over the cells that exist.
enum class PoolRounding { Floor, Ceil };

const char* to_string(ConvMode mode) noexcept;

std::size_t conv_output_extent(std::size_t in, ConvMode mode);
std::size_t pool_output_extent(std::size_t in, PoolRounding rounding);

// ---------------------------------------------------------------------------
// 3x3, stride-1 convolution. Kernels are F x C x 3 x 3, bias has F entries.

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                      const BasicTensor<T>& bias, ConvMode mode);

template <typename T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicTensor<T> kernels;
  BasicTensor<T> bias;
};

template <typename T>
ConvGrads<T> conv2d_grad(const BasicTensor<T>& input, const BasicTensor<T>& kernels,
                         const BasicTensor<T>& upstream, ConvMode mode);

// ---------------------------------------------------------------------------
// 2x2, stride-2 max pooling.

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  /// Flat input index of the winning cell for every output element.
  std::vector<std::size_t> argmax;
};

template <typename T>
PoolResult<T> maxpool2x2(const BasicTensor<T>& input, PoolRounding rounding);

template <typename T>
BasicTensor<T> maxpool2x2_grad(const BasicTensor<T>& upstream, const std::vector<std::size_t>& argmax,
                               const Shape& input_shape);

// ---------------------------------------------------------------------------
// Batch normalization over axis 1. Rank-4 inputs are normalized per channel
// across (batch, height, width); rank-2 inputs per column across the batch.

struct BatchNormConfig {
  double epsilon = 1e-5;
  double momentum = 0.9;  // weight kept on the previous running statistic
};

template <typename T>
struct BatchNormCache {
  BasicTensor<T> normalized;  // x_hat
  std::vector<double> inv_std;
  std::vector<double> mean;
};

template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& input, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                         BasicTensor<T>& running_mean, BasicTensor<T>& running_var, Phase phase,
                         BatchNormCache<T>* cache = nullptr, const BatchNormConfig& config = {});

/// Inference-phase normalization by stored statistics; never mutates them.
template <typename T>
BasicTensor<T> batchnorm_infer(const BasicTensor<T>& input, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                               const BasicTensor<T>& running_mean, const BasicTensor<T>& running_var,
                               const BatchNormConfig& config = {});

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> input;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

template <typename T>
BatchNormGrads<T> batchnorm_grad(const BasicTensor<T>& upstream, const BasicTensor<T>& gamma,
                                 const BatchNormCache<T>& cache);

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

/// `activation` may be either the ReLU input or its output; both are > 0 at
/// the same positions.
template <typename T>
BasicTensor<T> relu_grad(const BasicTensor<T>& upstream, const BasicTensor<T>& activation);

// ---------------------------------------------------------------------------
// Inverted dropout: survivors are scaled by 1/keep_prob so inference is identity.

template <typename T>
struct DropoutResult {
  BasicTensor<T> output;
  std::vector<T> scale;  // 0 or 1/keep_prob per element; empty in infer phase
};

template <typename T>
DropoutResult<T> dropout(const BasicTensor<T>& input, double keep_prob, Phase phase, std::uint64_t seed);

template <typename T>
BasicTensor<T> dropout_grad(const BasicTensor<T>& upstream, const std::vector<T>& scale);

// ---------------------------------------------------------------------------
// Fully connected: input B x D, weights D x U, bias U.

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias);

template <typename T>
struct DenseGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_grad(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                         const BasicTensor<T>& upstream);

// ---------------------------------------------------------------------------

/// Row-wise softmax of B x K scores, max-subtracted.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& scores);

inline constexpr double kLogFloor = 1e-12;

struct LossResult {
  double loss = 0.0;
  /// Gradient of the mean loss with respect to the pre-softmax scores.
  Tensor grad_scores;
};

/// Mean categorical cross-entropy of softmax probabilities against one-hot labels.
LossResult cross_entropy(const Tensor& probs, const Tensor& labels);

}  // namespace mcseg::nn
