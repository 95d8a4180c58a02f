#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "volreg/common.hpp"
#include "volreg/eval/metrics.hpp"
#include "volreg/regress/models.hpp"

namespace volreg::regress {

namespace {

/// Activations of every layer; the last entry is the output column.
std::vector<Matrix> forward(const MlpWeights& w, const Matrix& X) {
  std::vector<Matrix> a{X};
  for (std::size_t l = 0; l < w.W.size(); ++l) {
    Matrix z = (a.back() * w.W[l]).rowwise() + w.b[l].transpose();
    if (l + 1 < w.W.size()) z = z.cwiseMax(0.0);
    a.push_back(std::move(z));
  }
  return a;
}

MlpWeights zeros_like(const MlpWeights& w) {
  MlpWeights g;
  for (std::size_t l = 0; l < w.W.size(); ++l) {
    g.W.push_back(Matrix::Zero(w.W[l].rows(), w.W[l].cols()));
    g.b.push_back(Vector::Zero(w.b[l].size()));
  }
  return g;
}

Matrix rows_of(const Matrix& X, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

Vector rows_of(const Vector& y, std::span<const std::size_t> idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(idx[i])];
  return out;
}

}  // namespace

double mlp_loss_and_gradient(const MlpWeights& w, const Matrix& X, const Vector& y, MlpWeights* grad) {
  const auto a = forward(w, X);
  const Vector err = a.back().col(0) - y;
  const double n = static_cast<double>(X.rows());
  const double loss = err.squaredNorm() / n;
  if (!grad) return loss;
  *grad = zeros_like(w);
  Matrix delta = (2.0 / n) * err;  // d loss / d output, [n, 1]
  for (std::size_t l = w.W.size(); l-- > 0;) {
    grad->W[l] = a[l].transpose() * delta;
    grad->b[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    delta = (delta * w.W[l].transpose()).cwiseProduct((a[l].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

void Mlp::fit(const Matrix& X, const Vector& y) {
  const Eigen::Index n = X.rows();
  if (n < 2 || y.size() != n) throw InvalidArgument("mlp needs at least 2 training rows");
  if (opts_.hidden.empty()) throw InvalidArgument("mlp needs at least one hidden layer");
  Rng rng(derive_seed(seed_, 0x6D6C70));

  y_mean_ = y.mean();
  const double sd = std::sqrt((y.array() - y_mean_).square().mean());
  y_scale_ = sd > 1e-12 ? sd : 1.0;
  const Vector ys = (y.array() - y_mean_) / y_scale_;

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::size_t n_hold = n >= 10 ? static_cast<std::size_t>(std::round(opts_.holdout * static_cast<double>(n))) : 0;
  n_hold = std::min<std::size_t>(n_hold, static_cast<std::size_t>(n) - 2);
  const std::vector<std::size_t> hold_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
  const Matrix Xh = rows_of(X, hold_idx);
  const Vector yh = rows_of(ys, hold_idx);

  // Glorot-uniform weights, zero biases
  w_ = MlpWeights{};
  std::size_t in = static_cast<std::size_t>(X.cols());
  std::vector<std::size_t> widths = opts_.hidden;
  widths.push_back(1);
  for (std::size_t out : widths) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix W(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = rng.uniform(-limit, limit);
    w_.W.push_back(std::move(W));
    w_.b.push_back(Vector::Zero(static_cast<Eigen::Index>(out)));
    in = out;
  }

  MlpWeights m = zeros_like(w_), v = zeros_like(w_);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::size_t step = 0;
  MlpWeights best = w_;
  double best_pc = -std::numeric_limits<double>::infinity();
  best_epoch_ = 0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= opts_.epochs; ++epoch) {
    rng.shuffle(train_idx);
    for (std::size_t start = 0; start < train_idx.size(); start += opts_.batch_size) {
      const std::size_t end = std::min(train_idx.size(), start + opts_.batch_size);
      const std::span<const std::size_t> batch(train_idx.data() + start, end - start);
      MlpWeights g;
      mlp_loss_and_gradient(w_, rows_of(X, batch), rows_of(ys, batch), &g);
      ++step;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      auto update = [&](auto& p, auto& mm, auto& vv, const auto& gg) {
        mm = b1 * mm + (1 - b1) * gg;
        vv = b2 * vv + (1 - b2) * gg.cwiseProduct(gg);
        p.array() -= opts_.learning_rate * (mm.array() / c1) / ((vv.array() / c2).sqrt() + eps);
      };
      for (std::size_t l = 0; l < w_.W.size(); ++l) {
        update(w_.W[l], m.W[l], v.W[l], g.W[l]);
        update(w_.b[l], m.b[l], v.b[l], g.b[l]);
      }
    }
    if (n_hold < 2) continue;
    const Vector pred = forward(w_, Xh).back().col(0);
    double pc = -std::numeric_limits<double>::infinity();
    try {
      pc = eval::pearson(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                         std::span<const double>(yh.data(), static_cast<std::size_t>(yh.size())));
    } catch (const UndefinedMetric&) {
    }
    if (pc > best_pc) {
      best_pc = pc;
      best = w_;
      best_epoch_ = epoch;
      since_best = 0;
    } else if (++since_best >= opts_.patience) {
      break;
    }
  }
  if (best_epoch_ > 0) w_ = std::move(best);
  else best_epoch_ = opts_.epochs;
}

Vector Mlp::predict(const Matrix& X) const {
  if (w_.W.empty()) throw InvalidArgument("mlp is not fitted");
  if (X.cols() != w_.W.front().rows()) throw InvalidArgument("mlp: feature count mismatch");
  return (forward(w_, X).back().col(0).array() * y_scale_ + y_mean_).matrix();
}

void Mlp::save(store::Container& c) const {
  for (std::size_t l = 0; l < w_.W.size(); ++l) {
    const Matrix& W = w_.W[l];
    Tensor64 t({static_cast<std::size_t>(W.rows()), static_cast<std::size_t>(W.cols())});
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j) t(i, j) = W(i, j);
    c.add("model.W" + std::to_string(l), std::move(t));
    c.add("model.b" + std::to_string(l),
          Tensor64({static_cast<std::size_t>(w_.b[l].size())}, std::vector<double>(w_.b[l].begin(), w_.b[l].end())));
  }
  c.set("model.layers", std::to_string(w_.W.size()));
  c.set("model.y_mean", store::format_number(y_mean_));
  c.set("model.y_scale", store::format_number(y_scale_));
}

void Mlp::load(const store::Container& c) {
  const auto layers = static_cast<std::size_t>(c.require_number("model.layers"));
  w_ = MlpWeights{};
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor64& t = c.f64("model.W" + std::to_string(l));
    const Tensor64& b = c.f64("model.b" + std::to_string(l));
    if (t.rank() != 2 || b.size() != t.extent(1)) throw FormatError("mlp layer shapes disagree", 0);
    Matrix W(static_cast<Eigen::Index>(t.extent(0)), static_cast<Eigen::Index>(t.extent(1)));
    for (std::size_t i = 0; i < t.extent(0); ++i)
      for (std::size_t j = 0; j < t.extent(1); ++j) W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t(i, j);
    w_.W.push_back(std::move(W));
    w_.b.push_back(Eigen::Map<const Vector>(b.raw(), static_cast<Eigen::Index>(b.size())));
  }
  y_mean_ = c.require_number("model.y_mean");
  y_scale_ = c.require_number("model.y_scale");
}

}  // namespace volreg::regress
