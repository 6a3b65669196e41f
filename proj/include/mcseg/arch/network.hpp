#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mcseg/nn/layers.hpp"
#include "mcseg/nn/tensor.hpp"

namespace mcseg::arch {

using nn::ConvMode;
using nn::Phase;

inline constexpr std::size_t kConvLayers = 6;
inline constexpr std::size_t kHiddenUnits = 64;
inline constexpr std::size_t kClassCount = 2;

/// Shared Detector/Segmentator architecture:
/// conv1 -> pool -> conv2 -> pool -> conv3..conv6 -> FC64 (+dropout) -> FC2 -> softmax,
/// with batch norm and ReLU after every layer but the last.
struct NetworkSpec {
  std::size_t patch_size = 49;
  ConvMode conv_mode = ConvMode::Same;
  std::array<std::size_t, kConvLayers> filters{16, 16, 32, 32, 64, 64};
  double dropout_keep = 0.5;

  /// Throws std::invalid_argument if the spec cannot describe a network
  /// (even patch size, zero filters, a VALID chain that collapses, ...).
  void validate() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

nn::PoolRounding pool_rounding(ConvMode mode) noexcept;

/// Spatial extent after each stage: input, conv1, pool1, conv2, pool2, conv3, conv4, conv5, conv6.
/// For N=49 VALID this is 49, 47, 23, 21, 10, 8, 6, 4, 2.
std::array<std::size_t, 9> spatial_chain(const NetworkSpec& spec);

/// Width of the flattened conv6 output fed to the 64-unit layer.
std::size_t flattened_width(const NetworkSpec& spec);

std::uint64_t spec_fingerprint(const NetworkSpec& spec) noexcept;

template <typename T>
struct ConvBlock {
  nn::BasicTensor<T> kernels;  // F x C x 3 x 3
  nn::BasicTensor<T> bias;     // F
  nn::BasicTensor<T> gamma, beta, running_mean, running_var;
};

template <typename T>
struct HiddenBlock {
  nn::BasicTensor<T> weights;  // D x 64
  nn::BasicTensor<T> bias;
  nn::BasicTensor<T> gamma, beta, running_mean, running_var;
};

template <typename T>
struct OutputBlock {
  nn::BasicTensor<T> weights;  // 64 x 2
  nn::BasicTensor<T> bias;
};

template <typename T>
struct NetworkWeights;

/// Zero-filled weights of the right shapes (gamma and running var set to 1).
template <typename T>
NetworkWeights<T> allocate_weights(const NetworkSpec& spec);

template <typename T>
struct NetworkWeights {
  NetworkSpec spec;
  std::array<ConvBlock<T>, kConvLayers> conv;
  HiddenBlock<T> hidden;
  OutputBlock<T> output;
  /// Bumped by every parameter update so stale forward caches can be detected.
  std::uint64_t generation = 0;

  /// Every tensor in storage order (conv1..6, fc1, fc2; kernel, bias, gamma,
  /// beta, running mean, running var where present).
  std::vector<nn::BasicTensor<T>*> all_tensors();
  std::vector<const nn::BasicTensor<T>*> all_tensors() const;

  /// Trainable subset of all_tensors(), same relative order.
  std::vector<nn::BasicTensor<T>*> trainable();
  std::vector<const nn::BasicTensor<T>*> trainable() const;

  template <typename U>
  NetworkWeights<U> cast() const {
    NetworkWeights<U> out = allocate_weights<U>(spec);
    auto dst = out.all_tensors();
    auto src = all_tensors();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<U>();
    out.generation = generation;
    return out;
  }

  friend bool operator==(const NetworkWeights& a, const NetworkWeights& b) {
    if (!(a.spec == b.spec)) return false;
    auto ta = a.all_tensors();
    auto tb = b.all_tensors();
    for (std::size_t i = 0; i < ta.size(); ++i) {
      if (!(*ta[i] == *tb[i])) return false;
    }
    return true;
  }
};

/// He-initialized weights, rounded to single precision so the result
/// serializes losslessly. Deterministic in `seed`.
NetworkWeights<double> build_network(const NetworkSpec& spec, std::uint64_t seed);

/// Rounds every tensor to the nearest float, the storage precision of weight files.
void round_to_storage_precision(NetworkWeights<double>& weights);

struct ConvLayerCache {
  nn::Tensor input;       // conv input
  nn::BatchNormCache<double> bn;
  nn::Tensor activation;  // post-ReLU, pre-pool
  std::vector<std::size_t> pool_argmax;  // empty when the layer is not pooled
};

struct ForwardCache {
  std::uint64_t spec_fingerprint = 0;
  std::uint64_t generation = 0;
  Phase phase = Phase::Infer;
  std::array<ConvLayerCache, kConvLayers> conv;
  nn::Shape conv_output_shape;
  nn::Tensor flat;  // B x D, input to the hidden layer
  nn::BatchNormCache<double> hidden_bn;
  nn::Tensor hidden_activation;  // post-ReLU
  std::vector<double> dropout_scale;
  nn::Tensor dropped;  // input to the output layer
  nn::Tensor probs;
};

struct ForwardResult {
  nn::Tensor probs;
  ForwardCache cache;
};

/// Full forward pass. The train phase updates batch-norm running statistics
/// in `weights` and draws dropout masks from `dropout_seed`.
ForwardResult forward(NetworkWeights<double>& weights, const nn::Tensor& batch, Phase phase,
                      std::uint64_t dropout_seed = 0);

/// Inference-only forward pass returning B x 2 probabilities.
template <typename T>
nn::BasicTensor<T> predict(const NetworkWeights<T>& weights, const nn::BasicTensor<T>& batch);

/// Post-BN, post-ReLU activations of the 64-unit layer (dropout off).
template <typename T>
nn::BasicTensor<T> penultimate_features(const NetworkWeights<T>& weights, const nn::BasicTensor<T>& batch);

/// Gradients aligned with NetworkWeights::trainable().
struct NetworkGradients {
  std::vector<nn::Tensor> tensors;
};

/// Exact gradients of the mean cross-entropy for a train-phase cache built
/// from the current weights. Throws std::logic_error on a stale cache.
NetworkGradients backward(const NetworkWeights<double>& weights, const ForwardCache& cache, const nn::Tensor& labels);

}  // namespace mcseg::arch
