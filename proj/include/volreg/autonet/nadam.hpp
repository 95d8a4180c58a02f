#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "volreg/common.hpp"
#include "volreg/tensor.hpp"

namespace volreg::autonet {

struct NadamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates, one pair per parameter tensor.
template <class T>
struct NadamState {
  std::vector<BasicTensor<T>> m;
  std::vector<BasicTensor<T>> v;
};

template <class T>
struct NamedGradient {
  std::string name;
  BasicTensor<T>* param;
  const BasicTensor<T>* grad;
};

/// One Nesterov-Adam step at time t >= 1:
///   m = b1*m + (1-b1)*g
///   v = b2*v + (1-b2)*g^2
///   m_hat = b1*m/(1-b1^(t+1)) + (1-b1)*g/(1-b1^t)
///   v_hat = v/(1-b2^t)
///   p -= lr * m_hat / (sqrt(v_hat) + eps)
/// Non-finite gradients are rejected before any parameter is touched.
template <class T>
void nadam_step(const std::vector<NamedGradient<T>>& params, NadamState<T>& state, std::size_t t, double lr,
                const NadamConfig& cfg = {}) {
  if (t < 1) throw InvalidArgument("nadam step index must be >= 1");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.param->shape(), T{0});
      state.v.emplace_back(p.param->shape(), T{0});
    }
  }
  if (state.m.size() != params.size()) throw InvalidArgument("nadam state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.grad->shape() != p.param->shape() || state.m[i].shape() != p.param->shape()) {
      throw InvalidArgument("nadam shape mismatch for parameter '" + p.name + "'");
    }
    for (T g : p.grad->data()) {
      if (!std::isfinite(static_cast<double>(g))) throw InvalidArgument("non-finite gradient in parameter '" + p.name + "'");
    }
  }
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double b1t = std::pow(b1, static_cast<double>(t));
  const double b1t_next = b1t * b1;
  const double b2t = std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& param = *params[i].param;
    const auto& grad = *params[i].grad;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < param.size(); ++k) {
      const double g = grad[k];
      const double mk = b1 * m[k] + (1 - b1) * g;
      const double vk = b2 * v[k] + (1 - b2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double m_hat = b1 * mk / (1 - b1t_next) + (1 - b1) * g / (1 - b1t);
      const double v_hat = vk / (1 - b2t);
      param[k] = static_cast<T>(param[k] - lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
  }
}

}  // namespace volreg::autonet
