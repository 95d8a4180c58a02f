#include "volreg/regress/model.hpp"

#include <cmath>

#include "volreg/common.hpp"
#include "volreg/regress/models.hpp"

namespace volreg::regress {

const std::vector<RegressorKind>& all_kinds() {
  static const std::vector<RegressorKind> kinds = {
      RegressorKind::LR,  RegressorKind::KNR, RegressorKind::SVR_linear, RegressorKind::SVR_poly, RegressorKind::SVR_rbf,
      RegressorKind::MLP, RegressorKind::DTR, RegressorKind::RFR,        RegressorKind::ETR,      RegressorKind::GBR};
  return kinds;
}

std::string to_string(RegressorKind k) {
  switch (k) {
    case RegressorKind::LR: return "LR";
    case RegressorKind::KNR: return "KNR";
    case RegressorKind::SVR_linear: return "SVR_linear";
    case RegressorKind::SVR_poly: return "SVR_poly";
    case RegressorKind::SVR_rbf: return "SVR_rbf";
    case RegressorKind::MLP: return "MLP";
    case RegressorKind::DTR: return "DTR";
    case RegressorKind::RFR: return "RFR";
    case RegressorKind::ETR: return "ETR";
    case RegressorKind::GBR: return "GBR";
  }
  return "?";
}

RegressorKind parse_kind(const std::string& s) {
  for (RegressorKind k : all_kinds()) {
    if (to_string(k) == s) return k;
  }
  throw InvalidArgument("unknown regressor kind '" + s + "'");
}

Standardizer Standardizer::fit(const Matrix& X) {
  if (X.rows() < 2) throw InvalidArgument("standardizer needs at least 2 training rows");
  Vector mean = X.colwise().mean().transpose();
  Vector scale(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double sd = std::sqrt((X.col(j).array() - mean[j]).square().mean());
    scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  return {std::move(mean), std::move(scale)};
}

Matrix Standardizer::apply(const Matrix& X) const {
  if (X.cols() != mean_.size()) throw InvalidArgument("standardizer: feature count mismatch");
  return ((X.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array()).matrix();
}

eval::HyperParams default_params(RegressorKind kind) {
  switch (kind) {
    case RegressorKind::LR: return {{"fit_intercept", 1}};
    case RegressorKind::KNR: return {{"k", 5}};
    case RegressorKind::SVR_linear: return {{"C", 1.0}, {"epsilon", 0.1}};
    case RegressorKind::SVR_poly: return {{"C", 1.0}, {"epsilon", 0.1}, {"degree", 3}};
    case RegressorKind::SVR_rbf: return {{"C", 1.0}, {"epsilon", 0.1}, {"gamma", 0.05}};
    case RegressorKind::MLP: return {{"width", 32}, {"lr", 1e-3}, {"layers", 1}};
    case RegressorKind::DTR: return {{"max_depth", 8}};
    case RegressorKind::RFR: return {{"n_trees", 200}, {"max_depth", 12}};
    case RegressorKind::ETR: return {{"n_trees", 100}, {"max_depth", 12}};
    case RegressorKind::GBR: return {{"n_rounds", 200}, {"learning_rate", 0.1}, {"max_depth", 3}};
  }
  return {};
}

namespace {

eval::ParamRange range(std::string name, eval::Scale scale, double lo, double hi) {
  return {std::move(name), scale, lo, hi, {}};
}

eval::ParamRange choice(std::string name, std::vector<double> values) {
  return {std::move(name), eval::Scale::Choice, 0.0, 0.0, std::move(values)};
}

}  // namespace

eval::SearchSpace default_search_space(RegressorKind kind) {
  using eval::Scale;
  const auto C = range("C", Scale::Log, 1e-2, 1e3);
  const auto eps = range("epsilon", Scale::Linear, 0.01, 1.0);
  const auto depth = range("max_depth", Scale::Integer, 2, 20);
  switch (kind) {
    case RegressorKind::LR: return {{choice("fit_intercept", {1})}};
    case RegressorKind::KNR: return {{range("k", Scale::Integer, 1, 30)}};
    case RegressorKind::SVR_linear: return {{C, eps}};
    case RegressorKind::SVR_poly: return {{C, eps, choice("degree", {2, 3, 4})}};
    case RegressorKind::SVR_rbf: return {{C, eps, range("gamma", Scale::Log, 1e-4, 10)}};
    case RegressorKind::MLP:
      return {{range("width", Scale::Integer, 8, 128), range("lr", Scale::Log, 1e-4, 1e-2), choice("layers", {1, 2})}};
    case RegressorKind::DTR: return {{depth}};
    case RegressorKind::RFR: return {{range("n_trees", Scale::Integer, 50, 500), depth}};
    case RegressorKind::ETR: return {{choice("n_trees", {100}), depth}};
    case RegressorKind::GBR:
      return {{range("n_rounds", Scale::Integer, 50, 500), range("learning_rate", Scale::Log, 0.01, 0.3),
               range("max_depth", Scale::Integer, 1, 5)}};
  }
  return {};
}

namespace {

eval::HyperParams merged(RegressorKind kind, const eval::HyperParams& hp) {
  eval::HyperParams out = default_params(kind);
  for (const auto& [k, v] : hp) {
    if (!out.contains(k)) throw InvalidArgument("unknown hyperparameter '" + k + "' for " + to_string(kind));
    if (!std::isfinite(v)) throw InvalidArgument("hyperparameter '" + k + "' is not finite");
    out[k] = v;
  }
  return out;
}

std::size_t count_param(const eval::HyperParams& hp, const std::string& name, double min) {
  const double v = hp.at(name);
  if (v < min || v != std::round(v)) throw InvalidArgument("hyperparameter '" + name + "' must be an integer >= " + std::to_string(static_cast<long>(min)));
  return static_cast<std::size_t>(v);
}

}  // namespace

std::unique_ptr<Model> make_model(RegressorKind kind, const eval::HyperParams& given, std::uint64_t seed) {
  const eval::HyperParams hp = merged(kind, given);
  switch (kind) {
    case RegressorKind::LR: return std::make_unique<LinearRegression>(hp.at("fit_intercept") != 0.0);
    case RegressorKind::KNR: return std::make_unique<KNeighbors>(count_param(hp, "k", 1));
    case RegressorKind::SVR_linear:
    case RegressorKind::SVR_poly:
    case RegressorKind::SVR_rbf: {
      SvrOptions o;
      o.kernel = kind == RegressorKind::SVR_linear ? KernelKind::Linear
                 : kind == RegressorKind::SVR_poly ? KernelKind::Poly
                                                   : KernelKind::Rbf;
      o.C = hp.at("C");
      o.epsilon = hp.at("epsilon");
      if (hp.contains("gamma")) o.gamma = hp.at("gamma");
      if (hp.contains("degree")) o.degree = static_cast<int>(count_param(hp, "degree", 1));
      return std::make_unique<SupportVectorRegression>(o);
    }
    case RegressorKind::MLP: {
      MlpOptions o;
      o.hidden.assign(count_param(hp, "layers", 1), count_param(hp, "width", 1));
      o.learning_rate = hp.at("lr");
      return std::make_unique<Mlp>(o, seed);
    }
    case RegressorKind::DTR: return std::make_unique<TreeEnsemble>(kind, 1, count_param(hp, "max_depth", 0), seed);
    case RegressorKind::RFR:
    case RegressorKind::ETR:
      return std::make_unique<TreeEnsemble>(kind, count_param(hp, "n_trees", 1), count_param(hp, "max_depth", 0), seed);
    case RegressorKind::GBR:
      return std::make_unique<GradientBoosting>(count_param(hp, "n_rounds", 0), hp.at("learning_rate"),
                                                count_param(hp, "max_depth", 0));
  }
  throw InvalidArgument("unknown regressor kind");
}

Pipeline::Pipeline(RegressorKind kind, eval::HyperParams hp, std::uint64_t seed)
    : kind_(kind), hp_(merged(kind, hp)), seed_(seed), model_(make_model(kind, hp_, seed)) {}

void Pipeline::fit(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) throw InvalidArgument("feature rows and targets differ in count");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw InvalidArgument("non-finite training target");
  }
  if (!X.allFinite()) throw InvalidArgument("non-finite training feature");
  standardizer_ = Standardizer::fit(X);
  arity_ = static_cast<std::size_t>(X.cols());
  model_->fit(standardizer_.apply(X), y);
}

Vector Pipeline::predict(const Matrix& X) const {
  if (arity_ == 0) throw InvalidArgument("pipeline is not fitted");
  if (static_cast<std::size_t>(X.cols()) != arity_) {
    throw InvalidArgument("expected " + std::to_string(arity_) + " features, got " + std::to_string(X.cols()));
  }
  return model_->predict(standardizer_.apply(X));
}

store::Container Pipeline::save() const {
  if (arity_ == 0) throw InvalidArgument("pipeline is not fitted");
  store::Container c;
  c.set("kind", to_string(kind_));
  c.set("seed", std::to_string(seed_));
  c.set("arity", std::to_string(arity_));
  for (const auto& [k, v] : hp_) c.set("hp." + k, store::format_number(v));
  const auto vec = [](const Vector& v) {
    return Tensor64({static_cast<std::size_t>(v.size())}, std::vector<double>(v.begin(), v.end()));
  };
  c.add("standardizer.mean", vec(standardizer_.mean()));
  c.add("standardizer.scale", vec(standardizer_.scale()));
  model_->save(c);
  return c;
}

Pipeline Pipeline::load(const store::Container& c) {
  const RegressorKind kind = parse_kind(c.require("kind"));
  eval::HyperParams hp;
  for (const auto& [k, v] : c.metadata()) {
    if (k.rfind("hp.", 0) == 0) hp[k.substr(3)] = c.require_number(k);
  }
  Pipeline p(kind, hp, std::stoull(c.require("seed")));
  p.arity_ = static_cast<std::size_t>(c.require_number("arity"));
  const Tensor64& mean = c.f64("standardizer.mean");
  const Tensor64& scale = c.f64("standardizer.scale");
  if (mean.size() != p.arity_ || scale.size() != p.arity_) throw FormatError("standardizer length does not match arity", 0);
  p.standardizer_ = Standardizer(Eigen::Map<const Vector>(mean.raw(), static_cast<Eigen::Index>(mean.size())),
                                 Eigen::Map<const Vector>(scale.raw(), static_cast<Eigen::Index>(scale.size())));
  p.model_->load(c);
  return p;
}

}  // namespace volreg::regress
