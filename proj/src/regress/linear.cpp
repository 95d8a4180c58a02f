#include <algorithm>
#include <numeric>

#include "volreg/common.hpp"
#include "volreg/regress/models.hpp"

namespace volreg::regress {

void LinearRegression::fit(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size() || X.rows() < 1) throw InvalidArgument("linear regression: bad training shapes");
  const Eigen::Index p = X.cols();
  const Eigen::Index q = p + (fit_intercept_ ? 1 : 0);
  Matrix A(X.rows(), q);
  A.leftCols(p) = X;
  if (fit_intercept_) A.col(p).setOnes();
  Matrix gram = A.transpose() * A;
  const Vector rhs = A.transpose() * y;
  Eigen::LDLT<Matrix> ldlt(gram);
  used_ridge_ = ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12;
  if (used_ridge_) {
    for (Eigen::Index i = 0; i < p; ++i) gram(i, i) += 1e-8;
    ldlt.compute(gram);
  }
  const Vector beta = ldlt.solve(rhs);
  coef_ = beta.head(p);
  intercept_ = fit_intercept_ ? beta[p] : 0.0;
}

Vector LinearRegression::predict(const Matrix& X) const {
  if (X.cols() != coef_.size()) throw InvalidArgument("linear regression: feature count mismatch");
  return (X * coef_).array() + intercept_;
}

void LinearRegression::save(store::Container& c) const {
  c.add("model.coef", Tensor64({static_cast<std::size_t>(coef_.size())}, std::vector<double>(coef_.begin(), coef_.end())));
  c.set("model.intercept", store::format_number(intercept_));
}

void LinearRegression::load(const store::Container& c) {
  const Tensor64& t = c.f64("model.coef");
  coef_ = Eigen::Map<const Vector>(t.raw(), static_cast<Eigen::Index>(t.size()));
  intercept_ = c.require_number("model.intercept");
}

void KNeighbors::fit(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) throw InvalidArgument("knn: bad training shapes");
  if (k_ < 1) throw InvalidArgument("knn needs k >= 1");
  if (k_ > static_cast<std::size_t>(X.rows())) {
    throw InvalidArgument("knn k=" + std::to_string(k_) + " exceeds the " + std::to_string(X.rows()) + " training rows");
  }
  X_ = X;
  y_ = y;
}

Vector KNeighbors::predict(const Matrix& X) const {
  if (X.cols() != X_.cols()) throw InvalidArgument("knn: feature count mismatch");
  const auto n = static_cast<std::size_t>(X_.rows());
  Vector out(X.rows());
  std::vector<std::pair<double, std::size_t>> d(n);
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (std::size_t i = 0; i < n; ++i) d[i] = {(X_.row(static_cast<Eigen::Index>(i)) - X.row(r)).squaredNorm(), i};
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k_), d.end());
    double s = 0.0;
    for (std::size_t j = 0; j < k_; ++j) s += y_[static_cast<Eigen::Index>(d[j].second)];
    out[r] = s / static_cast<double>(k_);
  }
  return out;
}

void KNeighbors::save(store::Container& c) const {
  Tensor64 x({static_cast<std::size_t>(X_.rows()), static_cast<std::size_t>(X_.cols())});
  for (Eigen::Index i = 0; i < X_.rows(); ++i)
    for (Eigen::Index j = 0; j < X_.cols(); ++j) x(i, j) = X_(i, j);
  c.add("model.x", std::move(x));
  c.add("model.y", Tensor64({static_cast<std::size_t>(y_.size())}, std::vector<double>(y_.begin(), y_.end())));
}

void KNeighbors::load(const store::Container& c) {
  const Tensor64& x = c.f64("model.x");
  const Tensor64& y = c.f64("model.y");
  if (x.rank() != 2 || y.size() != x.extent(0)) throw FormatError("knn training data shapes disagree", 0);
  X_.resize(static_cast<Eigen::Index>(x.extent(0)), static_cast<Eigen::Index>(x.extent(1)));
  for (std::size_t i = 0; i < x.extent(0); ++i)
    for (std::size_t j = 0; j < x.extent(1); ++j) X_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x(i, j);
  y_ = Eigen::Map<const Vector>(y.raw(), static_cast<Eigen::Index>(y.size()));
  if (k_ > y.size()) throw FormatError("knn k exceeds stored training rows", 0);
}

}  // namespace volreg::regress
