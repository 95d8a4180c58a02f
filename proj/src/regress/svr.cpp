#include <algorithm>
#include <cmath>
#include <limits>

#include "volreg/common.hpp"
#include "volreg/regress/models.hpp"

namespace volreg::regress {

namespace {

constexpr double kTau = 1e-12;

}  // namespace

RegressorKind SupportVectorRegression::kind() const {
  switch (opts_.kernel) {
    case KernelKind::Linear: return RegressorKind::SVR_linear;
    case KernelKind::Poly: return RegressorKind::SVR_poly;
    case KernelKind::Rbf: return RegressorKind::SVR_rbf;
  }
  return RegressorKind::SVR_rbf;
}

double SupportVectorRegression::kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                                       const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
  switch (opts_.kernel) {
    case KernelKind::Linear: return a.dot(b);
    case KernelKind::Poly: return std::pow(gamma_ * a.dot(b) + opts_.coef0, opts_.degree);
    case KernelKind::Rbf: return std::exp(-gamma_ * (a - b).squaredNorm());
  }
  return 0.0;
}

void SupportVectorRegression::fit(const Matrix& X, const Vector& z) {
  const Eigen::Index n = X.rows();
  if (n < 1 || z.size() != n) throw InvalidArgument("svr: bad training shapes");
  if (!(opts_.C > 0.0)) throw InvalidArgument("svr needs C > 0");
  if (!(opts_.epsilon >= 0.0)) throw InvalidArgument("svr needs epsilon >= 0");
  gamma_ = opts_.gamma > 0.0 ? opts_.gamma : 1.0 / static_cast<double>(X.cols());

  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) K(i, j) = K(j, i) = kernel(X.row(i), X.row(j));

  // variables 0..n-1 are alpha+ (y=+1), n..2n-1 are alpha- (y=-1)
  const Eigen::Index l = 2 * n;
  const double C = opts_.C;
  std::vector<double> alpha(static_cast<std::size_t>(l), 0.0), G(static_cast<std::size_t>(l));
  std::vector<int> y(static_cast<std::size_t>(l));
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = 1;
    y[i + n] = -1;
    G[i] = opts_.epsilon - z[i];
    G[i + n] = opts_.epsilon + z[i];
  }
  auto Q = [&](Eigen::Index i, Eigen::Index j) { return y[i] * y[j] * K(i % n, j % n); };

  const std::size_t cap = opts_.max_iterations ? opts_.max_iterations : std::max<std::size_t>(100000, 100 * static_cast<std::size_t>(l));
  iterations_ = 0;
  while (iterations_ < cap) {
    // second-order working set selection
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < l; ++t) {
      if (y[t] == 1 ? alpha[t] < C : alpha[t] > 0) {
        const double v = -y[t] * G[t];
        if (v >= gmax) {
          gmax = v;
          i = t;
        }
      }
    }
    if (i < 0) break;
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    const double qd_i = K(i % n, i % n);
    for (Eigen::Index t = 0; t < l; ++t) {
      if (y[t] == 1 ? alpha[t] > 0 : alpha[t] < C) {
        const double v = y[t] * G[t];
        gmax2 = std::max(gmax2, v);
        const double grad_diff = gmax + v;
        if (grad_diff > 0) {
          double quad = qd_i + K(t % n, t % n) - 2.0 * y[i] * Q(i, t) * y[t];
          if (quad <= 0) quad = kTau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj <= best_obj) {
            best_obj = obj;
            j = t;
          }
        }
      }
    }
    if (gmax + gmax2 < opts_.tolerance || j < 0) break;
    ++iterations_;

    const double old_i = alpha[i], old_j = alpha[j];
    const double qij = Q(i, j);
    if (y[i] != y[j]) {
      double quad = K(i % n, i % n) + K(j % n, j % n) + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = K(i % n, i % n) + K(j % n, j % n) - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (Eigen::Index t = 0; t < l; ++t) G[t] += Q(i, t) * di + Q(j, t) * dj;
  }

  // rho from free variables, or the midpoint of the feasible interval
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t n_free = 0;
  for (Eigen::Index t = 0; t < l; ++t) {
    const double yg = y[t] * G[t];
    if (alpha[t] >= C) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  rho_ = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2;

  alpha_plus_.resize(n);
  alpha_minus_.resize(n);
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < n; ++i) {
    alpha_plus_[i] = alpha[i];
    alpha_minus_[i] = alpha[i + n];
    if (alpha[i] - alpha[i + n] != 0.0) support.push_back(i);
  }
  sv_.resize(static_cast<Eigen::Index>(support.size()), X.cols());
  coef_.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t s = 0; s < support.size(); ++s) {
    sv_.row(static_cast<Eigen::Index>(s)) = X.row(support[s]);
    coef_[static_cast<Eigen::Index>(s)] = alpha[support[s]] - alpha[support[s] + n];
  }
}

Vector SupportVectorRegression::predict(const Matrix& X) const {
  if (sv_.rows() > 0 && X.cols() != sv_.cols()) throw InvalidArgument("svr: feature count mismatch");
  Vector out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < sv_.rows(); ++k) s += coef_[k] * kernel(sv_.row(k), X.row(r));
    out[r] = s - rho_;
  }
  return out;
}

void SupportVectorRegression::set_expansion(Matrix sv, Vector coef, double rho, double gamma) {
  if (sv.rows() != coef.size()) throw InvalidArgument("svr expansion: support vector and coefficient counts differ");
  sv_ = std::move(sv);
  coef_ = std::move(coef);
  rho_ = rho;
  gamma_ = gamma;
}

void SupportVectorRegression::save(store::Container& c) const {
  c.set("model.rho", store::format_number(rho_));
  c.set("model.gamma", store::format_number(gamma_));
  c.set("model.support_count", std::to_string(sv_.rows()));
  if (sv_.rows() == 0) return;
  Tensor64 sv({static_cast<std::size_t>(sv_.rows()), static_cast<std::size_t>(sv_.cols())});
  for (Eigen::Index i = 0; i < sv_.rows(); ++i)
    for (Eigen::Index j = 0; j < sv_.cols(); ++j) sv(i, j) = sv_(i, j);
  c.add("model.support_vectors", std::move(sv));
  c.add("model.coef", Tensor64({static_cast<std::size_t>(coef_.size())}, std::vector<double>(coef_.begin(), coef_.end())));
}

void SupportVectorRegression::load(const store::Container& c) {
  rho_ = c.require_number("model.rho");
  gamma_ = c.require_number("model.gamma");
  if (c.require_number("model.support_count") == 0) {
    sv_.resize(0, 0);
    coef_.resize(0);
    return;
  }
  const Tensor64& sv = c.f64("model.support_vectors");
  const Tensor64& coef = c.f64("model.coef");
  if (sv.rank() != 2 || coef.size() != sv.extent(0)) throw FormatError("svr support vector shapes disagree", 0);
  sv_.resize(static_cast<Eigen::Index>(sv.extent(0)), static_cast<Eigen::Index>(sv.extent(1)));
  for (std::size_t i = 0; i < sv.extent(0); ++i)
    for (std::size_t j = 0; j < sv.extent(1); ++j) sv_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sv(i, j);
  coef_ = Eigen::Map<const Vector>(coef.raw(), static_cast<Eigen::Index>(coef.size()));
}

}  // namespace volreg::regress
