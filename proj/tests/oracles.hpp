#pragma once

// Reference implementations shared by the unit tests and the acceptance
// runner. They are deliberately naive and independent of the library kernels.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "volreg/autonet/network.hpp"
#include "volreg/autonet/train.hpp"
#include "volreg/cam/cam.hpp"
#include "volreg/rng.hpp"

namespace oracle {

using volreg::BasicTensor;
using volreg::Rng;

/// Six nested loops over (n, co, x, y, z) and (kx, ky, kz, ci), zero "same"
/// padding, one multiply_add per tap including padded ones.
template <class T>
BasicTensor<T> conv3d(const BasicTensor<T>& in, const BasicTensor<T>& w, std::size_t stride) {
  const std::size_t N = in.extent(0), C = in.extent(1), O = w.extent(4);
  std::size_t ext[3], out[3], pad[3], k[3];
  for (int a = 0; a < 3; ++a) {
    ext[a] = in.extent(2 + a);
    k[a] = w.extent(a);
    out[a] = (ext[a] + stride - 1) / stride;
    const std::size_t need = (out[a] - 1) * stride + k[a];
    pad[a] = need > ext[a] ? (need - ext[a]) / 2 : 0;
  }
  BasicTensor<T> y({N, O, out[0], out[1], out[2]});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t co = 0; co < O; ++co)
      for (std::size_t ox = 0; ox < out[0]; ++ox)
        for (std::size_t oy = 0; oy < out[1]; ++oy)
          for (std::size_t oz = 0; oz < out[2]; ++oz) {
            T acc{0};
            for (std::size_t kx = 0; kx < k[0]; ++kx)
              for (std::size_t ky = 0; ky < k[1]; ++ky)
                for (std::size_t kz = 0; kz < k[2]; ++kz)
                  for (std::size_t ci = 0; ci < C; ++ci) {
                    const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad[0]);
                    const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad[1]);
                    const long iz = static_cast<long>(oz * stride + kz) - static_cast<long>(pad[2]);
                    const bool inside = ix >= 0 && iy >= 0 && iz >= 0 && ix < static_cast<long>(ext[0]) &&
                                        iy < static_cast<long>(ext[1]) && iz < static_cast<long>(ext[2]);
                    const T x = inside ? in(n, ci, static_cast<std::size_t>(ix), static_cast<std::size_t>(iy),
                                            static_cast<std::size_t>(iz))
                                       : T{0};
                    acc = volreg::multiply_add(x, w(kx, ky, kz, ci, co), acc);
                  }
            y(n, co, ox, oy, oz) = acc;
          }
  return y;
}

template <class T>
BasicTensor<T> random_tensor(const volreg::Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  BasicTensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// Two-pass Pearson correlation: means first, then centred sums.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double sum_squared_error(std::span<const double> x, std::span<const double> y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s;
}

inline double rmse_standard(std::span<const double> x, std::span<const double> y) {
  return std::sqrt(sum_squared_error(x, y) / static_cast<double>(x.size()));
}

inline double rmse_paper_literal(std::span<const double> x, std::span<const double> y) {
  return std::sqrt(sum_squared_error(x, y)) / static_cast<double>(x.size());
}

/// Two conv blocks of four channels on a 9x9x9 input; the first has stride 2
/// so both convolution paths are exercised.
inline volreg::autonet::NetworkSpec miniature_spec() {
  volreg::autonet::NetworkSpec spec;
  spec.conv_layers = {{4, 3, 2}, {4, 3, 1}};
  spec.dropout_rate = 0.2;
  spec.input_shape = {9, 9, 9};
  return spec;
}

struct GradientCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_relative = 0.0;
};

/// Compares every trainable gradient of the MSE loss (train-mode batch norm,
/// a fixed dropout mask) with central differences in double precision.
/// A value passes if its error is within rel of the larger magnitude or
/// below abs_floor.
inline GradientCheck check_network_gradients(const volreg::autonet::NetworkSpec& spec, std::uint64_t seed,
                                             std::size_t batch = 2, double h = 1e-6, double rel = 1e-4,
                                             double abs_floor = 1e-6) {
  using namespace volreg::autonet;
  Rng rng(seed);
  Parameters<double> params = build_network<double>(spec, seed);
  const auto& e = spec.input_shape;
  const auto input = random_tensor<double>({batch, spec.input_channels, e[0], e[1], e[2]}, rng, 0.0, 1.0);
  const auto target = random_tensor<double>({batch, spec.outputs}, rng, -0.8, 0.8);
  const std::uint64_t mask_seed = rng.bits();

  const auto loss_of = [&](Parameters<double>& p, ForwardTrace<double>* trace) {
    Rng mask(mask_seed);
    ForwardOptions opts{Mode::Train, &mask, false};
    const auto out = network_forward(spec, p, input, opts, trace);
    return std::pair{mse_loss(out.output, target), out.output};
  };

  ForwardTrace<double> trace;
  const auto [loss, output] = loss_of(params, &trace);
  (void)loss;
  const Parameters<double> grads = network_backward(spec, params, trace, mse_grad_activation(output, target));

  GradientCheck result;
  auto tensors = params.trainable();
  const auto grad_tensors = grads.trainable();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    auto& p = *tensors[t].second;
    const auto& g = *grad_tensors[t].second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + h;
      const double up = loss_of(params, nullptr).first;
      p[i] = saved - h;
      const double down = loss_of(params, nullptr).first;
      p[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = std::abs(numeric - g[i]);
      const double scale = std::max(std::abs(numeric), std::abs(g[i]));
      ++result.checked;
      if (err > abs_floor) {
        result.worst_relative = std::max(result.worst_relative, err / scale);
        if (err > rel * scale) ++result.failures;
      }
    }
  }
  return result;
}

/// A float checkpoint with random weights and non-trivial batch-norm state.
inline volreg::autonet::Checkpoint random_checkpoint(const volreg::autonet::NetworkSpec& spec, std::uint64_t seed) {
  using namespace volreg::autonet;
  volreg::autonet::Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.params = build_network<float>(spec, seed);
  Rng rng(volreg::derive_seed(seed, 99));
  for (std::size_t l = 0; l < spec.conv_layers.size(); ++l) {
    for (auto& v : ckpt.params.bn_gamma[l].data()) v = static_cast<float>(rng.uniform(0.5, 1.5));
    for (auto& v : ckpt.params.bn_beta[l].data()) v = static_cast<float>(rng.uniform(-0.2, 0.2));
    for (auto& v : ckpt.params.bn_mean[l].data()) v = static_cast<float>(rng.uniform(-0.1, 0.1));
    for (auto& v : ckpt.params.bn_var[l].data()) v = static_cast<float>(rng.uniform(0.5, 2.0));
  }
  for (auto& v : ckpt.params.head_bias.data()) v = static_cast<float>(rng.uniform(-0.3, 0.3));
  ckpt.epochs = 1;
  ckpt.best_epoch = 1;
  ckpt.batch_size = 1;
  ckpt.seed = seed;
  return ckpt;
}

struct CamIdentity {
  double mean_cam_plus_bias = 0.0;
  double activation = 0.0;
};

/// mean(CAM) + bias against the pre-tanh head output for one prepared input.
inline CamIdentity cam_identity(const volreg::autonet::Checkpoint& ckpt, const volreg::Tensor& prepared,
                                volreg::eval::Target target) {
  using namespace volreg;
  const auto cam = cam::compute_cam(ckpt, prepared, target);
  double sum = 0;
  for (float v : cam.values.data()) sum += v;
  const std::size_t out = cam::output_index(target);
  const std::size_t idx = 0;
  const Tensor batch = autonet::stack_inputs({prepared}, std::span<const std::size_t>(&idx, 1));
  auto params = ckpt.params;
  const auto head = autonet::network_forward(ckpt.spec, params, batch, {});
  return {sum / static_cast<double>(cam.values.size()) + ckpt.params.head_bias[out], head.activation(0, out)};
}

}  // namespace oracle
