#include "mcseg/nn/layers.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace mcseg::nn {

namespace {

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatrixRM<T>>;

void require_rank(const Shape& shape, std::size_t rank, const char* what) {
  if (shape.size() != rank) {
    throw std::invalid_argument(std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                                shape_to_string(shape));
  }
}

struct ConvGeometry {
  std::size_t batch, channels, height, width;
  std::size_t filters, out_h, out_w;
  std::ptrdiff_t pad;
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const BasicTensor<T>& kernels, ConvMode mode) {
  require_rank(input.shape(), 4, "conv2d input");
  require_rank(kernels.shape(), 4, "conv2d kernels");
  if (kernels.extent(2) != 3 || kernels.extent(3) != 3) {
    throw std::invalid_argument("conv2d kernels must be 3x3, got " + shape_to_string(kernels.shape()));
  }
  if (kernels.extent(1) != input.extent(1)) {
    throw std::invalid_argument("conv2d channel mismatch: input " + shape_to_string(input.shape()) +
                                ", kernels " + shape_to_string(kernels.shape()));
  }
  ConvGeometry g{};
  g.batch = input.extent(0);
  g.channels = input.extent(1);
  g.height = input.extent(2);
  g.width = input.extent(3);
  g.filters = kernels.extent(0);
  g.out_h = conv_output_extent(g.height, mode);
  g.out_w = conv_output_extent(g.width, mode);
  g.pad = mode == ConvMode::Same ? 1 : 0;
  return g;
}

// Unfolds the 3x3 neighbourhoods of one batch item into a (C*9) x (Ho*Wo) matrix.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* src = image + c * g.height * g.width;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* row = cols + ((c * 3 + ky) * 3 + kx) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - g.pad;
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_w, T{0});
            continue;
          }
          const T* line = src + static_cast<std::size_t>(iy) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - g.pad;
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) ? T{0} : line[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* image) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* dst = image + c * g.height * g.width;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const T* row = cols + ((c * 3 + ky) * 3 + kx) * plane;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - g.pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* line = dst + static_cast<std::size_t>(iy) * g.width;
          const T* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - g.pad;
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) line[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Channel layout for batch norm: `groups` outer blocks, `channels` per block,
// `inner` contiguous elements per channel.
struct ChannelLayout {
  std::size_t groups, channels, inner;
  std::size_t per_channel() const { return groups * inner; }
};

ChannelLayout channel_layout(const Shape& shape) {
  if (shape.size() == 4) return {shape[0], shape[1], shape[2] * shape[3]};
  if (shape.size() == 2) return {shape[0], shape[1], 1};
  throw std::invalid_argument("batchnorm expects rank 2 or 4 input, got " + shape_to_string(shape));
}

}  // namespace

const char* to_string(ConvMode mode) noexcept { return mode == ConvMode::Same ? "same" : "valid"; }

std::size_t conv_output_extent(std::size_t in, ConvMode mode) {
  if (mode == ConvMode::Same) return in;
  if (in < 3) throw std::invalid_argument("valid convolution needs spatial extent >= 3, got " + std::to_string(in));
  return in - 2;
}

std::size_t pool_output_extent(std::size_t in, PoolRounding rounding) {
  if (in < 2) throw std::invalid_argument("max pooling needs spatial extent >= 2, got " + std::to_string(in));
  return rounding == PoolRounding::Ceil ? (in + 1) / 2 : in / 2;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, const BasicTensor<T>& bias,
                      ConvMode mode) {
  const ConvGeometry g = conv_geometry(input, kernels, mode);
  if (bias.size() != g.filters) {
    throw std::invalid_argument("conv2d bias length " + std::to_string(bias.size()) + " != filter count " +
                                std::to_string(g.filters));
  }
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t k = g.channels * 9;
  BasicTensor<T> output({g.batch, g.filters, g.out_h, g.out_w});
  std::vector<T> cols(k * plane);
  ConstMapRM<T> weights(kernels.data(), static_cast<Eigen::Index>(g.filters), static_cast<Eigen::Index>(k));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.data(), static_cast<Eigen::Index>(g.filters));
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(input.data() + n * g.channels * g.height * g.width, g, cols.data());
    ConstMapRM<T> colmat(cols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(plane));
    MapRM<T> out(output.data() + n * g.filters * plane, static_cast<Eigen::Index>(g.filters),
                 static_cast<Eigen::Index>(plane));
    out.noalias() = weights * colmat;
    out.colwise() += b;
  }
  return output;
}

template <typename T>
ConvGrads<T> conv2d_grad(const BasicTensor<T>& input, const BasicTensor<T>& kernels, const BasicTensor<T>& upstream,
                         ConvMode mode) {
  const ConvGeometry g = conv_geometry(input, kernels, mode);
  const Shape expected{g.batch, g.filters, g.out_h, g.out_w};
  if (upstream.shape() != expected) {
    throw std::invalid_argument("conv2d_grad upstream shape " + shape_to_string(upstream.shape()) +
                                " != output shape " + shape_to_string(expected));
  }
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t k = g.channels * 9;
  ConvGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(kernels.shape()), BasicTensor<T>({g.filters})};
  std::vector<T> cols(k * plane);
  std::vector<T> grad_cols(k * plane);
  ConstMapRM<T> weights(kernels.data(), static_cast<Eigen::Index>(g.filters), static_cast<Eigen::Index>(k));
  MapRM<T> grad_weights(grads.kernels.data(), static_cast<Eigen::Index>(g.filters), static_cast<Eigen::Index>(k));
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(input.data() + n * g.channels * g.height * g.width, g, cols.data());
    ConstMapRM<T> colmat(cols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(plane));
    ConstMapRM<T> up(upstream.data() + n * g.filters * plane, static_cast<Eigen::Index>(g.filters),
                     static_cast<Eigen::Index>(plane));
    grad_weights.noalias() += up * colmat.transpose();
    // serial sums: Eigen's vectorized reductions vary with buffer alignment
    for (std::size_t f = 0; f < g.filters; ++f) {
      const T* row = upstream.data() + (n * g.filters + f) * plane;
      grads.bias[f] += std::accumulate(row, row + plane, T(0));
    }
    MapRM<T> gcols(grad_cols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(plane));
    gcols.noalias() = weights.transpose() * up;
    col2im_add(grad_cols.data(), g, grads.input.data() + n * g.channels * g.height * g.width);
  }
  return grads;
}

template <typename T>
PoolResult<T> maxpool2x2(const BasicTensor<T>& input, PoolRounding rounding) {
  require_rank(input.shape(), 4, "maxpool2x2 input");
  const std::size_t planes = input.extent(0) * input.extent(1);
  const std::size_t h = input.extent(2);
  const std::size_t w = input.extent(3);
  const std::size_t oh = pool_output_extent(h, rounding);
  const std::size_t ow = pool_output_extent(w, rounding);
  PoolResult<T> result{BasicTensor<T>({input.extent(0), input.extent(1), oh, ow}), {}};
  result.argmax.resize(result.output.size());
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t in_base = p * h * w;
    const std::size_t out_base = p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = in_base + (2 * oy) * w + 2 * ox;
        T best_value = input[best];
        for (std::size_t dy = 0; dy < 2; ++dy) {
          const std::size_t y = 2 * oy + dy;
          if (y >= h) break;
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t x = 2 * ox + dx;
            if (x >= w) break;
            const std::size_t idx = in_base + y * w + x;
            if (input[idx] > best_value) {
              best_value = input[idx];
              best = idx;
            }
          }
        }
        result.output[out_base + oy * ow + ox] = best_value;
        result.argmax[out_base + oy * ow + ox] = best;
      }
    }
  }
  return result;
}

template <typename T>
BasicTensor<T> maxpool2x2_grad(const BasicTensor<T>& upstream, const std::vector<std::size_t>& argmax,
                               const Shape& input_shape) {
  if (argmax.size() != upstream.size()) {
    throw std::invalid_argument("maxpool2x2_grad: argmax map does not match upstream gradient");
  }
  BasicTensor<T> grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += upstream[i];
  return grad;
}

template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& input, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                         BasicTensor<T>& running_mean, BasicTensor<T>& running_var, Phase phase,
                         BatchNormCache<T>* cache, const BatchNormConfig& config) {
  const ChannelLayout layout = channel_layout(input.shape());
  const std::size_t channels = layout.channels;
  if (gamma.size() != channels || beta.size() != channels || running_mean.size() != channels ||
      running_var.size() != channels) {
    throw std::invalid_argument("batchnorm parameter length does not match channel count " +
                                std::to_string(channels));
  }
  BasicTensor<T> output(input.shape());
  std::vector<double> mean(channels), inv_std(channels);

  if (phase == Phase::Train) {
    if (input.extent(0) < 2) throw std::invalid_argument("batchnorm train phase requires batch size >= 2");
    const double m = static_cast<double>(layout.per_channel());
    for (std::size_t c = 0; c < channels; ++c) {
      double sum = 0.0;
      for (std::size_t g = 0; g < layout.groups; ++g) {
        const T* p = input.data() + (g * channels + c) * layout.inner;
        for (std::size_t i = 0; i < layout.inner; ++i) sum += p[i];
      }
      mean[c] = sum / m;
      double sq = 0.0;
      for (std::size_t g = 0; g < layout.groups; ++g) {
        const T* p = input.data() + (g * channels + c) * layout.inner;
        for (std::size_t i = 0; i < layout.inner; ++i) {
          const double d = p[i] - mean[c];
          sq += d * d;
        }
      }
      const double var = sq / m;
      inv_std[c] = 1.0 / std::sqrt(var + config.epsilon);
      running_mean[c] = static_cast<T>(config.momentum * running_mean[c] + (1.0 - config.momentum) * mean[c]);
      running_var[c] = static_cast<T>(config.momentum * running_var[c] + (1.0 - config.momentum) * var);
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + config.epsilon);
    }
  }

  BasicTensor<T> normalized;
  if (cache) normalized = BasicTensor<T>(input.shape());
  for (std::size_t g = 0; g < layout.groups; ++g) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (g * channels + c) * layout.inner;
      const double scale = gamma[c];
      const double shift = beta[c];
      for (std::size_t i = 0; i < layout.inner; ++i) {
        const double x_hat = (input[base + i] - mean[c]) * inv_std[c];
        if (cache) normalized[base + i] = static_cast<T>(x_hat);
        output[base + i] = static_cast<T>(scale * x_hat + shift);
      }
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->mean = std::move(mean);
  }
  return output;
}

template <typename T>
BasicTensor<T> batchnorm_infer(const BasicTensor<T>& input, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                               const BasicTensor<T>& running_mean, const BasicTensor<T>& running_var,
                               const BatchNormConfig& config) {
  const ChannelLayout layout = channel_layout(input.shape());
  const std::size_t channels = layout.channels;
  if (gamma.size() != channels || beta.size() != channels || running_mean.size() != channels ||
      running_var.size() != channels) {
    throw std::invalid_argument("batchnorm parameter length does not match channel count " +
                                std::to_string(channels));
  }
  // Folded into one multiply-add per element.
  std::vector<T> scale(channels), shift(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const double s = gamma[c] / std::sqrt(static_cast<double>(running_var[c]) + config.epsilon);
    scale[c] = static_cast<T>(s);
    shift[c] = static_cast<T>(beta[c] - s * running_mean[c]);
  }
  BasicTensor<T> output(input.shape());
  for (std::size_t g = 0; g < layout.groups; ++g) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (g * channels + c) * layout.inner;
      for (std::size_t i = 0; i < layout.inner; ++i) output[base + i] = input[base + i] * scale[c] + shift[c];
    }
  }
  return output;
}

template <typename T>
BatchNormGrads<T> batchnorm_grad(const BasicTensor<T>& upstream, const BasicTensor<T>& gamma,
                                 const BatchNormCache<T>& cache) {
  if (upstream.shape() != cache.normalized.shape()) {
    throw std::invalid_argument("batchnorm_grad upstream shape does not match cached activations");
  }
  const ChannelLayout layout = channel_layout(upstream.shape());
  const std::size_t channels = layout.channels;
  const double m = static_cast<double>(layout.per_channel());
  BatchNormGrads<T> grads{BasicTensor<T>(upstream.shape()), BasicTensor<T>({channels}), BasicTensor<T>({channels})};
  for (std::size_t c = 0; c < channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t g = 0; g < layout.groups; ++g) {
      const std::size_t base = (g * channels + c) * layout.inner;
      for (std::size_t i = 0; i < layout.inner; ++i) {
        sum_dy += upstream[base + i];
        sum_dy_xhat += upstream[base + i] * cache.normalized[base + i];
      }
    }
    grads.gamma[c] = static_cast<T>(sum_dy_xhat);
    grads.beta[c] = static_cast<T>(sum_dy);
    const double k = gamma[c] * cache.inv_std[c] / m;
    for (std::size_t g = 0; g < layout.groups; ++g) {
      const std::size_t base = (g * channels + c) * layout.inner;
      for (std::size_t i = 0; i < layout.inner; ++i) {
        grads.input[base + i] =
            static_cast<T>(k * (m * upstream[base + i] - sum_dy - cache.normalized[base + i] * sum_dy_xhat));
      }
    }
  }
  return grads;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (T& v : out.values()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
BasicTensor<T> relu_grad(const BasicTensor<T>& upstream, const BasicTensor<T>& activation) {
  if (upstream.shape() != activation.shape()) throw std::invalid_argument("relu_grad shape mismatch");
  BasicTensor<T> grad = upstream;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > T{0})) grad[i] = T{0};
  }
  return grad;
}

template <typename T>
DropoutResult<T> dropout(const BasicTensor<T>& input, double keep_prob, Phase phase, std::uint64_t seed) {
  if (!(keep_prob > 0.0) || keep_prob > 1.0) {
    throw std::invalid_argument("dropout keep_prob must lie in (0, 1], got " + std::to_string(keep_prob));
  }
  if (phase == Phase::Infer || keep_prob == 1.0) return {input, {}};
  DropoutResult<T> result{BasicTensor<T>(input.shape()), std::vector<T>(input.size())};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const T survivor_scale = static_cast<T>(1.0 / keep_prob);
  for (std::size_t i = 0; i < input.size(); ++i) {
    result.scale[i] = uniform(rng) < keep_prob ? survivor_scale : T{0};
    result.output[i] = input[i] * result.scale[i];
  }
  return result;
}

template <typename T>
BasicTensor<T> dropout_grad(const BasicTensor<T>& upstream, const std::vector<T>& scale) {
  if (scale.empty()) return upstream;
  if (scale.size() != upstream.size()) throw std::invalid_argument("dropout_grad mask size mismatch");
  BasicTensor<T> grad = upstream;
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= scale[i];
  return grad;
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
  require_rank(input.shape(), 2, "dense input");
  require_rank(weights.shape(), 2, "dense weights");
  const std::size_t batch = input.extent(0), in_dim = input.extent(1), units = weights.extent(1);
  if (weights.extent(0) != in_dim) {
    throw std::invalid_argument("dense dimension mismatch: input " + shape_to_string(input.shape()) + ", weights " +
                                shape_to_string(weights.shape()));
  }
  if (bias.size() != units) throw std::invalid_argument("dense bias length does not match unit count");
  BasicTensor<T> output({batch, units});
  ConstMapRM<T> x(input.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(in_dim));
  ConstMapRM<T> w(weights.data(), static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(units));
  MapRM<T> y(output.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(units));
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data(), static_cast<Eigen::Index>(units));
  y.noalias() = x * w;
  y.rowwise() += b;
  return output;
}

template <typename T>
DenseGrads<T> dense_grad(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& upstream) {
  require_rank(input.shape(), 2, "dense_grad input");
  require_rank(weights.shape(), 2, "dense_grad weights");
  const std::size_t batch = input.extent(0), in_dim = input.extent(1), units = weights.extent(1);
  if (weights.extent(0) != in_dim || upstream.shape() != Shape{batch, units}) {
    throw std::invalid_argument("dense_grad shape mismatch");
  }
  DenseGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()), BasicTensor<T>({units})};
  ConstMapRM<T> x(input.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(in_dim));
  ConstMapRM<T> w(weights.data(), static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(units));
  ConstMapRM<T> up(upstream.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(units));
  MapRM<T> gx(grads.input.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(in_dim));
  MapRM<T> gw(grads.weights.data(), static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(units));
  gx.noalias() = up * w.transpose();
  gw.noalias() = x.transpose() * up;
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t u = 0; u < units; ++u) grads.bias[u] += upstream[i * units + u];
  return grads;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& scores) {
  require_rank(scores.shape(), 2, "softmax scores");
  const std::size_t batch = scores.extent(0), classes = scores.extent(1);
  if (classes < 2) throw std::invalid_argument("softmax needs at least 2 classes");
  BasicTensor<T> probs(scores.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < classes; ++k) peak = std::max(peak, static_cast<double>(scores(b, k)));
    double total = 0.0;
    std::vector<double> e(classes);
    for (std::size_t k = 0; k < classes; ++k) {
      e[k] = std::exp(static_cast<double>(scores(b, k)) - peak);
      total += e[k];
    }
    for (std::size_t k = 0; k < classes; ++k) probs(b, k) = static_cast<T>(e[k] / total);
  }
  return probs;
}

LossResult cross_entropy(const Tensor& probs, const Tensor& labels) {
  require_rank(probs.shape(), 2, "cross_entropy probs");
  if (labels.shape() != probs.shape()) {
    throw std::invalid_argument("cross_entropy label shape " + shape_to_string(labels.shape()) +
                                " != probability shape " + shape_to_string(probs.shape()));
  }
  const std::size_t batch = probs.extent(0), classes = probs.extent(1);
  LossResult result{0.0, Tensor(probs.shape())};
  for (std::size_t b = 0; b < batch; ++b) {
    double row_sum = 0.0;
    int hot = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      const double y = labels(b, k);
      if (y != 0.0 && y != 1.0) throw std::invalid_argument("cross_entropy labels must be one-hot");
      hot += y == 1.0;
      row_sum += probs(b, k);
    }
    if (hot != 1) throw std::invalid_argument("cross_entropy labels must be one-hot");
    if (std::abs(row_sum - 1.0) > 1e-6) throw std::invalid_argument("cross_entropy probability rows must sum to 1");
    for (std::size_t k = 0; k < classes; ++k) {
      if (labels(b, k) == 1.0) result.loss -= std::log(std::max(probs(b, k), kLogFloor));
      result.grad_scores(b, k) = (probs(b, k) - labels(b, k)) / static_cast<double>(batch);
    }
  }
  result.loss /= static_cast<double>(batch);
  return result;
}

#define MCSEG_INSTANTIATE_LAYERS(T)                                                                              \
  template BasicTensor<T> conv2d<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,       \
                                    ConvMode);                                                                  \
  template ConvGrads<T> conv2d_grad<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
                                       ConvMode);                                                               \
  template PoolResult<T> maxpool2x2<T>(const BasicTensor<T>&, PoolRounding);                                    \
  template BasicTensor<T> maxpool2x2_grad<T>(const BasicTensor<T>&, const std::vector<std::size_t>&,           \
                                             const Shape&);                                                     \
  template BasicTensor<T> batchnorm<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,    \
                                       BasicTensor<T>&, BasicTensor<T>&, Phase, BatchNormCache<T>*,             \
                                       const BatchNormConfig&);                                                 \
  template BasicTensor<T> batchnorm_infer<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                             const BasicTensor<T>&, const BasicTensor<T>&,                      \
                                             const BatchNormConfig&);                                           \
  template BatchNormGrads<T> batchnorm_grad<T>(const BasicTensor<T>&, const BasicTensor<T>&,                    \
                                               const BatchNormCache<T>&);                                       \
  template BasicTensor<T> relu<T>(const BasicTensor<T>&);                                                       \
  template BasicTensor<T> relu_grad<T>(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template DropoutResult<T> dropout<T>(const BasicTensor<T>&, double, Phase, std::uint64_t);                    \
  template BasicTensor<T> dropout_grad<T>(const BasicTensor<T>&, const std::vector<T>&);                        \
  template BasicTensor<T> dense<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);        \
  template DenseGrads<T> dense_grad<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);    \
  template BasicTensor<T> softmax<T>(const BasicTensor<T>&);

MCSEG_INSTANTIATE_LAYERS(double)
MCSEG_INSTANTIATE_LAYERS(float)

#undef MCSEG_INSTANTIATE_LAYERS

}  // namespace mcseg::nn
