#pragma once

// Concrete regressors. Inputs are expected to be standardized already
// (Pipeline does that); each class also works on raw features.

#include <limits>
#include <span>

#include "volreg/regress/model.hpp"
#include "volreg/rng.hpp"

namespace volreg::regress {

/// Least squares through the normal equations. If X'X is numerically
/// singular a ridge of 1e-8 is added to its feature diagonal.
class LinearRegression final : public Model {
 public:
  explicit LinearRegression(bool fit_intercept = true) : fit_intercept_(fit_intercept) {}
  RegressorKind kind() const override { return RegressorKind::LR; }
  void fit(const Matrix& X, const Vector& y) override;
  Vector predict(const Matrix& X) const override;
  void save(store::Container& c) const override;
  void load(const store::Container& c) override;

  const Vector& coefficients() const { return coef_; }
  double intercept() const { return intercept_; }
  bool used_ridge() const { return used_ridge_; }

 private:
  bool fit_intercept_;
  Vector coef_;
  double intercept_ = 0.0;
  bool used_ridge_ = false;
};

/// Uniform-weight k nearest neighbours under Euclidean distance; equal
/// distances are resolved towards the lower training index.
class KNeighbors final : public Model {
 public:
  explicit KNeighbors(std::size_t k) : k_(k) {}
  RegressorKind kind() const override { return RegressorKind::KNR; }
  void fit(const Matrix& X, const Vector& y) override;
  Vector predict(const Matrix& X) const override;
  void save(store::Container& c) const override;
  void load(const store::Container& c) override;

 private:
  std::size_t k_;
  Matrix X_;
  Vector y_;
};

struct TreeOptions {
  std::size_t max_depth = std::numeric_limits<std::size_t>::max();
  std::size_t max_features = 0;  // 0 = every feature
  bool random_thresholds = false;
  std::size_t min_samples_split = 2;
};

/// CART regression tree on squared error. A split sends x <= threshold left.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  /// Trains on the given rows of X (repeats allowed, as in a bootstrap).
  void fit(const Matrix& X, const Vector& y, std::span<const std::size_t> rows, const TreeOptions& opts, Rng& rng);
  double predict_row(const Matrix& X, Eigen::Index row) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  std::vector<Node>& nodes() { return nodes_; }
  std::size_t depth() const;

 private:
  std::vector<Node> nodes_;
};

/// One or more trees averaged: a single tree (DTR), bootstrap + feature
/// subsampling (RFR) or random thresholds on all rows (ETR). Tree t is
/// trained from the stream derive_seed(seed, t).
class TreeEnsemble final : public Model {
 public:
  TreeEnsemble(RegressorKind kind, std::size_t trees, std::size_t max_depth, std::uint64_t seed);
  RegressorKind kind() const override { return kind_; }
  void fit(const Matrix& X, const Vector& y) override;
  Vector predict(const Matrix& X) const override;
  void save(store::Container& c) const override;
  void load(const store::Container& c) override;

  const std::vector<RegressionTree>& trees() const { return trees_; }
  /// Replaces tree t by one trained from an explicit seed.
  void fit_tree(const Matrix& X, const Vector& y, std::size_t t, std::uint64_t tree_seed);

 private:
  TreeOptions options(std::size_t features) const;

  RegressorKind kind_;
  std::size_t n_trees_;
  std::size_t max_depth_;
  std::uint64_t seed_;
  std::vector<RegressionTree> trees_;
};

/// Least-squares gradient boosting: f0 = mean(y), then each round fits a
/// depth-limited tree to the residuals and adds learning_rate times it.
class GradientBoosting final : public Model {
 public:
  GradientBoosting(std::size_t rounds, double learning_rate, std::size_t max_depth)
      : rounds_(rounds), learning_rate_(learning_rate), max_depth_(max_depth) {}
  RegressorKind kind() const override { return RegressorKind::GBR; }
  void fit(const Matrix& X, const Vector& y) override;
  Vector predict(const Matrix& X) const override;
  void save(store::Container& c) const override;
  void load(const store::Container& c) override;

  double base_prediction() const { return init_; }

 private:
  std::size_t rounds_;
  double learning_rate_;
  std::size_t max_depth_;
  double init_ = 0.0;
  std::vector<RegressionTree> trees_;
};

enum class KernelKind { Linear, Poly, Rbf };

struct SvrOptions {
  KernelKind kernel = KernelKind::Rbf;
  double C = 1.0;
  double epsilon = 0.1;
  double gamma = 0.0;  // 0 = 1 / n_features
  double coef0 = 1.0;
  int degree = 3;
  double tolerance = 1e-3;
  std::size_t max_iterations = 0;  // 0 = max(100000, 100 * 2n)
};

/// Epsilon-insensitive support vector regression. The dual over the 2n
/// variables (alpha+, alpha-) is solved by SMO with second-order working-set
/// selection; the model is f(x) = sum_i coef_i K(x_i, x) - rho.
class SupportVectorRegression final : public Model {
 public:
  explicit SupportVectorRegression(SvrOptions opts) : opts_(opts) {}
  RegressorKind kind() const override;
  void fit(const Matrix& X, const Vector& y) override;
  Vector predict(const Matrix& X) const override;
  void save(store::Container& c) const override;
  void load(const store::Container& c) override;

  double kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) const;
  const Matrix& support_vectors() const { return sv_; }
  const Vector& coefficients() const { return coef_; }
  double rho() const { return rho_; }
  /// alpha+ and alpha- per training row from the last fit.
  const Vector& alpha_plus() const { return alpha_plus_; }
  const Vector& alpha_minus() const { return alpha_minus_; }
  std::size_t iterations() const { return iterations_; }
  const SvrOptions& options() const { return opts_; }

  /// Installs an explicit kernel expansion.
  void set_expansion(Matrix sv, Vector coef, double rho, double gamma);

 private:
  SvrOptions opts_;
  double gamma_ = 0.0;
  Matrix sv_;
  Vector coef_;
  double rho_ = 0.0;
  Vector alpha_plus_, alpha_minus_;
  std::size_t iterations_ = 0;
};

struct MlpOptions {
  std::vector<std::size_t> hidden{32};
  double learning_rate = 1e-3;
  std::size_t epochs = 400;
  std::size_t batch_size = 32;
  double holdout = 0.1;
  std::size_t patience = 40;
};

struct MlpWeights {
  std::vector<Matrix> W;  // [in, out] per layer
  std::vector<Vector> b;
};

/// Mean squared error of a ReLU network with a linear output, and its
/// gradient with respect to every weight.
double mlp_loss_and_gradient(const MlpWeights& w, const Matrix& X, const Vector& y, MlpWeights* grad);

/// Fully connected ReLU regressor trained with Adam on internally
/// standardized targets. A random 10% of the rows is held out and the
/// weights from the epoch with the best holdout PC are kept.
class Mlp final : public Model {
 public:
  Mlp(MlpOptions opts, std::uint64_t seed) : opts_(std::move(opts)), seed_(seed) {}
  RegressorKind kind() const override { return RegressorKind::MLP; }
  void fit(const Matrix& X, const Vector& y) override;
  Vector predict(const Matrix& X) const override;
  void save(store::Container& c) const override;
  void load(const store::Container& c) override;

  const MlpWeights& weights() const { return w_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  MlpOptions opts_;
  std::uint64_t seed_;
  MlpWeights w_;
  double y_mean_ = 0.0, y_scale_ = 1.0;
  std::size_t best_epoch_ = 0;
};

}  // namespace volreg::regress
