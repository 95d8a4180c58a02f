#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "volreg/eval/search.hpp"
#include "volreg/store/container.hpp"

namespace volreg::regress {

using Matrix = Eigen::MatrixXd;  // rows are samples
using Vector = Eigen::VectorXd;

enum class RegressorKind { LR, KNR, SVR_linear, SVR_poly, SVR_rbf, MLP, DTR, RFR, ETR, GBR };

const std::vector<RegressorKind>& all_kinds();
std::string to_string(RegressorKind k);
RegressorKind parse_kind(const std::string& s);

/// Per-column centring and scaling with the population standard deviation.
/// Columns whose deviation is below 1e-12 are only centred.
class Standardizer {
 public:
  static Standardizer fit(const Matrix& X);
  Standardizer() = default;
  Standardizer(Vector mean, Vector scale) : mean_(std::move(mean)), scale_(std::move(scale)) {}

  Matrix apply(const Matrix& X) const;
  const Vector& mean() const { return mean_; }
  const Vector& scale() const { return scale_; }

 private:
  Vector mean_;
  Vector scale_;
};

class Model {
 public:
  virtual ~Model() = default;
  virtual RegressorKind kind() const = 0;
  virtual void fit(const Matrix& X, const Vector& y) = 0;
  virtual Vector predict(const Matrix& X) const = 0;
  /// Adds tensors prefixed "model." and any model metadata.
  virtual void save(store::Container& c) const = 0;
  virtual void load(const store::Container& c) = 0;
};

/// Unknown hyperparameter names are rejected; missing ones take defaults.
std::unique_ptr<Model> make_model(RegressorKind kind, const eval::HyperParams& hp, std::uint64_t seed);

eval::HyperParams default_params(RegressorKind kind);
eval::SearchSpace default_search_space(RegressorKind kind);

/// Standardizer fitted on the training rows followed by a model.
class Pipeline {
 public:
  Pipeline(RegressorKind kind, eval::HyperParams hp, std::uint64_t seed);

  void fit(const Matrix& X, const Vector& y);
  /// Throws InvalidArgument unless X has the fitted column count.
  Vector predict(const Matrix& X) const;

  RegressorKind kind() const { return kind_; }
  const eval::HyperParams& params() const { return hp_; }
  const Standardizer& standardizer() const { return standardizer_; }
  const Model& model() const { return *model_; }

  store::Container save() const;
  static Pipeline load(const store::Container& c);

 private:
  RegressorKind kind_;
  eval::HyperParams hp_;
  std::uint64_t seed_;
  std::size_t arity_ = 0;
  Standardizer standardizer_;
  std::unique_ptr<Model> model_;
};

}  // namespace volreg::regress
