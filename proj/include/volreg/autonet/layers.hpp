#pragma once

#include <cmath>
#include <vector>

#include "volreg/common.hpp"
#include "volreg/rng.hpp"
#include "volreg/tensor.hpp"

namespace volreg::autonet {

enum class Mode { Train, Infer };

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

template <class T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;
};

template <class T>
struct BatchNormCache {
  BasicTensor<T> normalized;     // x-hat
  std::vector<double> inv_std;  // per channel
};

template <class T>
struct BatchNormGradients {
  BasicTensor<T> grad_input;
  std::vector<T> grad_gamma;
  std::vector<T> grad_beta;
};

namespace detail {

inline void check_channels(std::size_t channels, std::size_t got, const char* what) {
  if (got != channels) {
    throw InvalidArgument(std::string("batchnorm ") + what + " has " + std::to_string(got) + " entries, expected " +
                          std::to_string(channels));
  }
}

}  // namespace detail

/// Batch normalization over (N, x, y, z) per channel of an N,C,... tensor.
/// Train mode normalizes by the biased batch variance and blends the unbiased
/// one into the running statistics (running = m*running + (1-m)*batch, m=0.9)
/// when update_stats is set; infer mode uses the running statistics.
template <class T>
BasicTensor<T> batchnorm_forward(const BasicTensor<T>& input, const std::vector<T>& gamma, const std::vector<T>& beta,
                                 BatchNormState<T>& state, Mode mode, BatchNormCache<T>* cache = nullptr,
                                 bool update_stats = true) {
  if (input.rank() < 2) throw InvalidArgument("batchnorm input must have at least rank 2");
  const std::size_t n = input.extent(0), channels = input.extent(1);
  const std::size_t inner = input.size() / (n * channels);
  detail::check_channels(channels, gamma.size(), "gamma");
  detail::check_channels(channels, beta.size(), "beta");
  detail::check_channels(channels, state.running_mean.size(), "running_mean");
  detail::check_channels(channels, state.running_var.size(), "running_var");

  BasicTensor<T> out(input.shape());
  if (cache) {
    cache->normalized = BasicTensor<T>(input.shape());
    cache->inv_std.assign(channels, 0.0);
  }
  for (std::size_t c = 0; c < channels; ++c) {
    double mean, var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = input.raw() + (b * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) sum += p[i];
      }
      const double count = static_cast<double>(n * inner);
      mean = sum / count;
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = input.raw() + (b * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = p[i] - mean;
          sq += d * d;
        }
      }
      var = sq / count;
      if (update_stats) {
        const double unbiased = count > 1 ? sq / (count - 1) : var;
        state.running_mean[c] = static_cast<T>(kBatchNormMomentum * state.running_mean[c] + (1 - kBatchNormMomentum) * mean);
        state.running_var[c] = static_cast<T>(kBatchNormMomentum * state.running_var[c] + (1 - kBatchNormMomentum) * unbiased);
      }
    } else {
      mean = state.running_mean[c];
      var = state.running_var[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + kBatchNormEpsilon);
    if (cache) cache->inv_std[c] = inv_std;
    const double g = gamma[c], bt = beta[c];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const double xhat = (input[off + i] - mean) * inv_std;
        if (cache) cache->normalized[off + i] = static_cast<T>(xhat);
        out[off + i] = static_cast<T>(xhat * g + bt);
      }
    }
  }
  return out;
}

/// Backward of train-mode batch normalization.
template <class T>
BatchNormGradients<T> batchnorm_backward(const BasicTensor<T>& grad_out, const BatchNormCache<T>& cache,
                                         const std::vector<T>& gamma) {
  const std::size_t n = grad_out.extent(0), channels = grad_out.extent(1);
  const std::size_t inner = grad_out.size() / (n * channels);
  const double count = static_cast<double>(n * inner);
  BatchNormGradients<T> g{BasicTensor<T>(grad_out.shape()), std::vector<T>(channels), std::vector<T>(channels)};
  for (std::size_t c = 0; c < channels; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xhat += static_cast<double>(grad_out[off + i]) * cache.normalized[off + i];
      }
    }
    g.grad_beta[c] = static_cast<T>(sum_dy);
    g.grad_gamma[c] = static_cast<T>(sum_dy_xhat);
    const double scale = gamma[c] * cache.inv_std[c];
    const double mean_dy = sum_dy / count, mean_dy_xhat = sum_dy_xhat / count;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        g.grad_input[off + i] =
            static_cast<T>(scale * (grad_out[off + i] - mean_dy - cache.normalized[off + i] * mean_dy_xhat));
      }
    }
  }
  return g;
}

template <class T>
void relu_inplace(BasicTensor<T>& t) {
  for (auto& v : t.data()) v = v > T{0} ? v : T{0};
}

/// Spatial (channel-wise) dropout. In train mode each (sample, channel) map is
/// zeroed with probability `rate` and survivors are scaled by 1/(1-rate); the
/// per-map factors are written to `scale_out` when given. Infer mode and
/// rate 0 are the identity.
template <class T>
BasicTensor<T> spatial_dropout3d(const BasicTensor<T>& featmaps, double rate, Mode mode, Rng* rng,
                                 std::vector<T>* scale_out = nullptr) {
  if (!(rate >= 0.0) || rate >= 1.0) throw InvalidArgument("dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (featmaps.rank() < 2) throw InvalidArgument("dropout expects N,C,... feature maps");
  const std::size_t maps = featmaps.extent(0) * featmaps.extent(1);
  const std::size_t inner = featmaps.size() / maps;
  if (scale_out) scale_out->assign(maps, T{1});
  if (mode == Mode::Infer || rate == 0.0) return featmaps;
  if (!rng) throw InvalidArgument("train-mode dropout needs a random stream");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  BasicTensor<T> out(featmaps.shape());
  for (std::size_t m = 0; m < maps; ++m) {
    const T s = rng->bernoulli(rate) ? T{0} : keep_scale;
    if (scale_out) (*scale_out)[m] = s;
    for (std::size_t i = 0; i < inner; ++i) out[m * inner + i] = featmaps[m * inner + i] * s;
  }
  return out;
}

template <class T>
struct HeadOutput {
  BasicTensor<T> pooled;      // [N, C] spatial means
  BasicTensor<T> activation;  // [N, outputs] pre-tanh
  BasicTensor<T> output;      // [N, outputs] tanh
};

/// Global average pooling followed by a dense layer with tanh:
/// y_j = tanh(sum_k w[k,j] * mean(f_k) + b_j).
template <class T>
HeadOutput<T> gap_head_forward(const BasicTensor<T>& featmaps, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  if (featmaps.rank() < 3) throw InvalidArgument("head expects N,C,spatial... feature maps");
  const std::size_t n = featmaps.extent(0), channels = featmaps.extent(1);
  if (weight.rank() != 2 || weight.extent(0) != channels) {
    throw InvalidArgument("head weight " + shape_string(weight.shape()) + " does not match " + std::to_string(channels) +
                          " channels");
  }
  const std::size_t outputs = weight.extent(1);
  if (bias.size() != outputs) throw InvalidArgument("head bias length mismatch");
  const std::size_t inner = featmaps.size() / (n * channels);
  HeadOutput<T> h{BasicTensor<T>({n, channels}), BasicTensor<T>({n, outputs}), BasicTensor<T>({n, outputs})};
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t k = 0; k < channels; ++k) {
      double sum = 0.0;
      const T* p = featmaps.raw() + (b * channels + k) * inner;
      for (std::size_t i = 0; i < inner; ++i) sum += p[i];
      h.pooled(b, k) = static_cast<T>(sum / static_cast<double>(inner));
    }
    for (std::size_t j = 0; j < outputs; ++j) {
      double a = bias[j];
      for (std::size_t k = 0; k < channels; ++k) a += static_cast<double>(weight(k, j)) * h.pooled(b, k);
      h.activation(b, j) = static_cast<T>(a);
      h.output(b, j) = static_cast<T>(std::tanh(a));
    }
  }
  return h;
}

}  // namespace volreg::autonet
