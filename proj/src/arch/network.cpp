#include "mcseg/arch/network.hpp"

#include <stdexcept>
#include <string>

#include "mcseg/nn/init.hpp"
#include "mcseg/nn/random.hpp"

namespace mcseg::arch {

namespace {

void check_batch(const NetworkSpec& spec, const nn::Shape& shape) {
  const std::size_t n = spec.patch_size;
  if (shape.size() != 4 || shape[1] != 1 || shape[2] != n || shape[3] != n) {
    throw std::invalid_argument("network expects a Bx1x" + std::to_string(n) + "x" + std::to_string(n) +
                                " batch, got " + nn::shape_to_string(shape));
  }
}

template <typename T>
nn::BasicTensor<T> ones(std::size_t n) {
  return nn::BasicTensor<T>({n}, T{1});
}

template <typename T>
nn::BasicTensor<T> hidden_features(const NetworkWeights<T>& w, const nn::BasicTensor<T>& batch) {
  check_batch(w.spec, batch.shape());
  const nn::PoolRounding rounding = pool_rounding(w.spec.conv_mode);
  nn::BasicTensor<T> x = batch;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    const ConvBlock<T>& layer = w.conv[i];
    x = nn::conv2d(x, layer.kernels, layer.bias, w.spec.conv_mode);
    x = nn::relu(nn::batchnorm_infer(x, layer.gamma, layer.beta, layer.running_mean, layer.running_var));
    if (i < 2) x = nn::maxpool2x2(x, rounding).output;
  }
  const std::size_t batch_size = batch.extent(0);
  x.reshape({batch_size, x.size() / batch_size});
  x = nn::dense(x, w.hidden.weights, w.hidden.bias);
  return nn::relu(nn::batchnorm_infer(x, w.hidden.gamma, w.hidden.beta, w.hidden.running_mean, w.hidden.running_var));
}

}  // namespace

void NetworkSpec::validate() const {
  if (patch_size % 2 == 0) {
    throw std::invalid_argument("patch size must be odd so a central pixel exists, got " + std::to_string(patch_size));
  }
  for (std::size_t f : filters) {
    if (f == 0) throw std::invalid_argument("filter counts must be positive");
  }
  if (!(dropout_keep > 0.0) || dropout_keep > 1.0) throw std::invalid_argument("dropout keep must lie in (0, 1]");
  spatial_chain(*this);
}

nn::PoolRounding pool_rounding(ConvMode mode) noexcept {
  return mode == ConvMode::Same ? nn::PoolRounding::Ceil : nn::PoolRounding::Floor;
}

std::array<std::size_t, 9> spatial_chain(const NetworkSpec& spec) {
  std::array<std::size_t, 9> chain{};
  try {
    std::size_t e = spec.patch_size;
    chain[0] = e;
    std::size_t k = 1;
    for (std::size_t layer = 0; layer < kConvLayers; ++layer) {
      e = nn::conv_output_extent(e, spec.conv_mode);
      chain[k++] = e;
      if (layer < 2) {
        e = nn::pool_output_extent(e, pool_rounding(spec.conv_mode));
        chain[k++] = e;
      }
    }
  } catch (const std::invalid_argument& err) {
    throw std::invalid_argument("patch size " + std::to_string(spec.patch_size) + " is too small for the " +
                                nn::to_string(spec.conv_mode) + " chain: " + err.what());
  }
  return chain;
}

std::size_t flattened_width(const NetworkSpec& spec) {
  const std::size_t e = spatial_chain(spec).back();
  return spec.filters.back() * e * e;
}

std::uint64_t spec_fingerprint(const NetworkSpec& spec) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(spec.patch_size);
  mix(spec.conv_mode == ConvMode::Same ? 1 : 0);
  for (std::size_t f : spec.filters) mix(f);
  mix(static_cast<std::uint64_t>(spec.dropout_keep * 1e9));
  return h;
}

template <typename T>
std::vector<nn::BasicTensor<T>*> NetworkWeights<T>::all_tensors() {
  std::vector<nn::BasicTensor<T>*> out;
  for (auto& c : conv) {
    out.insert(out.end(), {&c.kernels, &c.bias, &c.gamma, &c.beta, &c.running_mean, &c.running_var});
  }
  out.insert(out.end(), {&hidden.weights, &hidden.bias, &hidden.gamma, &hidden.beta, &hidden.running_mean,
                         &hidden.running_var});
  out.insert(out.end(), {&output.weights, &output.bias});
  return out;
}

template <typename T>
std::vector<const nn::BasicTensor<T>*> NetworkWeights<T>::all_tensors() const {
  auto mutable_view = const_cast<NetworkWeights<T>*>(this)->all_tensors();
  return {mutable_view.begin(), mutable_view.end()};
}

template <typename T>
std::vector<nn::BasicTensor<T>*> NetworkWeights<T>::trainable() {
  std::vector<nn::BasicTensor<T>*> out;
  for (auto& c : conv) out.insert(out.end(), {&c.kernels, &c.bias, &c.gamma, &c.beta});
  out.insert(out.end(), {&hidden.weights, &hidden.bias, &hidden.gamma, &hidden.beta});
  out.insert(out.end(), {&output.weights, &output.bias});
  return out;
}

template <typename T>
std::vector<const nn::BasicTensor<T>*> NetworkWeights<T>::trainable() const {
  auto mutable_view = const_cast<NetworkWeights<T>*>(this)->trainable();
  return {mutable_view.begin(), mutable_view.end()};
}

template <typename T>
NetworkWeights<T> allocate_weights(const NetworkSpec& spec) {
  spec.validate();
  NetworkWeights<T> w;
  w.spec = spec;
  std::size_t in_channels = 1;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    const std::size_t f = spec.filters[i];
    w.conv[i] = ConvBlock<T>{nn::BasicTensor<T>({f, in_channels, 3, 3}), nn::BasicTensor<T>({f}), ones<T>(f),
                             nn::BasicTensor<T>({f}), nn::BasicTensor<T>({f}), ones<T>(f)};
    in_channels = f;
  }
  const std::size_t width = flattened_width(spec);
  w.hidden = HiddenBlock<T>{nn::BasicTensor<T>({width, kHiddenUnits}), nn::BasicTensor<T>({kHiddenUnits}),
                            ones<T>(kHiddenUnits),                       nn::BasicTensor<T>({kHiddenUnits}),
                            nn::BasicTensor<T>({kHiddenUnits}),          ones<T>(kHiddenUnits)};
  w.output = OutputBlock<T>{nn::BasicTensor<T>({kHiddenUnits, kClassCount}), nn::BasicTensor<T>({kClassCount})};
  return w;
}

NetworkWeights<double> build_network(const NetworkSpec& spec, std::uint64_t seed) {
  NetworkWeights<double> w = allocate_weights<double>(spec);
  std::size_t in_channels = 1;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    w.conv[i].kernels = nn::he_init(in_channels * 9, w.conv[i].kernels.shape(), nn::derive_seed(seed, i));
    in_channels = spec.filters[i];
  }
  w.hidden.weights = nn::he_init(w.hidden.weights.extent(0), w.hidden.weights.shape(), nn::derive_seed(seed, 6));
  w.output.weights = nn::he_init(kHiddenUnits, w.output.weights.shape(), nn::derive_seed(seed, 7));
  round_to_storage_precision(w);
  return w;
}

void round_to_storage_precision(NetworkWeights<double>& weights) {
  for (nn::Tensor* t : weights.all_tensors()) {
    for (double& v : t->values()) v = static_cast<double>(static_cast<float>(v));
  }
}

ForwardResult forward(NetworkWeights<double>& w, const nn::Tensor& batch, Phase phase, std::uint64_t dropout_seed) {
  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.spec_fingerprint = spec_fingerprint(w.spec);
  cache.generation = w.generation;
  cache.phase = phase;
  if (phase == Phase::Infer) {
    result.probs = predict(w, batch);
    cache.probs = result.probs;
    return result;
  }

  check_batch(w.spec, batch.shape());
  const nn::PoolRounding rounding = pool_rounding(w.spec.conv_mode);
  nn::Tensor x = batch;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    ConvBlock<double>& layer = w.conv[i];
    ConvLayerCache& lc = cache.conv[i];
    lc.input = x;
    x = nn::conv2d(x, layer.kernels, layer.bias, w.spec.conv_mode);
    x = nn::batchnorm(x, layer.gamma, layer.beta, layer.running_mean, layer.running_var, Phase::Train, &lc.bn);
    x = nn::relu(x);
    lc.activation = x;
    if (i < 2) {
      auto pooled = nn::maxpool2x2(x, rounding);
      lc.pool_argmax = std::move(pooled.argmax);
      x = std::move(pooled.output);
    }
  }
  cache.conv_output_shape = x.shape();
  const std::size_t batch_size = batch.extent(0);
  x.reshape({batch_size, x.size() / batch_size});
  cache.flat = x;
  x = nn::dense(x, w.hidden.weights, w.hidden.bias);
  x = nn::batchnorm(x, w.hidden.gamma, w.hidden.beta, w.hidden.running_mean, w.hidden.running_var, Phase::Train,
                    &cache.hidden_bn);
  x = nn::relu(x);
  cache.hidden_activation = x;
  auto dropped = nn::dropout(x, w.spec.dropout_keep, Phase::Train, dropout_seed);
  cache.dropout_scale = std::move(dropped.scale);
  cache.dropped = std::move(dropped.output);
  result.probs = nn::softmax(nn::dense(cache.dropped, w.output.weights, w.output.bias));
  cache.probs = result.probs;
  return result;
}

template <typename T>
nn::BasicTensor<T> predict(const NetworkWeights<T>& weights, const nn::BasicTensor<T>& batch) {
  return nn::softmax(nn::dense(hidden_features(weights, batch), weights.output.weights, weights.output.bias));
}

template <typename T>
nn::BasicTensor<T> penultimate_features(const NetworkWeights<T>& weights, const nn::BasicTensor<T>& batch) {
  return hidden_features(weights, batch);
}

NetworkGradients backward(const NetworkWeights<double>& w, const ForwardCache& cache, const nn::Tensor& labels) {
  if (cache.phase != Phase::Train) throw std::logic_error("backward requires a train-phase forward cache");
  if (cache.spec_fingerprint != spec_fingerprint(w.spec) || cache.generation != w.generation) {
    throw std::logic_error("backward called with a stale forward cache");
  }
  const nn::LossResult loss = nn::cross_entropy(cache.probs, labels);

  auto out_grads = nn::dense_grad(cache.dropped, w.output.weights, loss.grad_scores);
  nn::Tensor g = nn::dropout_grad(out_grads.input, cache.dropout_scale);
  g = nn::relu_grad(g, cache.hidden_activation);
  auto hidden_bn = nn::batchnorm_grad(g, w.hidden.gamma, cache.hidden_bn);
  auto hidden_grads = nn::dense_grad(cache.flat, w.hidden.weights, hidden_bn.input);

  std::array<std::array<nn::Tensor, 4>, kConvLayers> conv_grads;
  g = std::move(hidden_grads.input).reshaped(cache.conv_output_shape);
  for (std::size_t k = kConvLayers; k-- > 0;) {
    const ConvLayerCache& lc = cache.conv[k];
    if (!lc.pool_argmax.empty()) g = nn::maxpool2x2_grad(g, lc.pool_argmax, lc.activation.shape());
    g = nn::relu_grad(g, lc.activation);
    auto bn = nn::batchnorm_grad(g, w.conv[k].gamma, lc.bn);
    auto conv = nn::conv2d_grad(lc.input, w.conv[k].kernels, bn.input, w.spec.conv_mode);
    conv_grads[k] = {std::move(conv.kernels), std::move(conv.bias), std::move(bn.gamma), std::move(bn.beta)};
    g = std::move(conv.input);
  }

  NetworkGradients grads;
  for (auto& layer : conv_grads) {
    for (auto& t : layer) grads.tensors.push_back(std::move(t));
  }
  grads.tensors.push_back(std::move(hidden_grads.weights));
  grads.tensors.push_back(std::move(hidden_grads.bias));
  grads.tensors.push_back(std::move(hidden_bn.gamma));
  grads.tensors.push_back(std::move(hidden_bn.beta));
  grads.tensors.push_back(std::move(out_grads.weights));
  grads.tensors.push_back(std::move(out_grads.bias));
  return grads;
}

template struct NetworkWeights<double>;
template struct NetworkWeights<float>;
template NetworkWeights<double> allocate_weights<double>(const NetworkSpec&);
template NetworkWeights<float> allocate_weights<float>(const NetworkSpec&);
template nn::BasicTensor<double> predict<double>(const NetworkWeights<double>&, const nn::BasicTensor<double>&);
template nn::BasicTensor<float> predict<float>(const NetworkWeights<float>&, const nn::BasicTensor<float>&);
template nn::BasicTensor<double> penultimate_features<double>(const NetworkWeights<double>&,
                                                              const nn::BasicTensor<double>&);
template nn::BasicTensor<float> penultimate_features<float>(const NetworkWeights<float>&,
                                                            const nn::BasicTensor<float>&);

}  // namespace mcseg::arch
