#include "volreg/regress/benchmark.hpp"

namespace volreg::regress {

Matrix feature_matrix(std::span<const FeatureRow> rows, std::span<const std::size_t> indices) {
  Matrix X(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const FeatureRow& row = rows[indices[r]];
    for (std::size_t k = 0; k < kFeatureCount; ++k) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = row.values[k];
  }
  return X;
}

namespace {

Vector gather(std::span<const double> values, std::span<const std::size_t> indices) {
  Vector v(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[indices[i]];
  return v;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

class PipelineFit final : public eval::TrialFit {
 public:
  PipelineFit(Pipeline p, const SplitData& data) : pipeline_(std::move(p)), data_(data) {}
  std::vector<double> predict_validation() override { return to_std(pipeline_.predict(data_.X_validation)); }
  std::vector<double> predict_test() override { return to_std(pipeline_.predict(data_.X_test)); }

 private:
  Pipeline pipeline_;
  const SplitData& data_;
};

}  // namespace

SplitData split_data(std::span<const FeatureRow> rows, std::span<const double> targets, const eval::SplitPlan& plan) {
  if (rows.size() != targets.size() || plan.assignment.size() != rows.size()) {
    throw InvalidArgument("feature rows, targets and split plan differ in length");
  }
  SplitData d;
  const auto tr = plan.indices(eval::Partition::Train);
  const auto va = plan.indices(eval::Partition::Validation);
  const auto te = plan.indices(eval::Partition::Test);
  d.X_train = feature_matrix(rows, tr);
  d.X_validation = feature_matrix(rows, va);
  d.X_test = feature_matrix(rows, te);
  d.y_train = gather(targets, tr);
  d.y_validation = gather(targets, va);
  d.y_test = gather(targets, te);
  return d;
}

std::unique_ptr<eval::TrialFit> PipelineBackend::fit(const eval::HyperParams& hp, std::uint64_t seed) {
  Pipeline p(kind_, hp, seed);
  p.fit(data_.X_train, data_.y_train);
  return std::make_unique<PipelineFit>(std::move(p), data_);
}

std::vector<double> PipelineBackend::validation_targets() const { return to_std(data_.y_validation); }
std::vector<double> PipelineBackend::test_targets() const { return to_std(data_.y_test); }

}  // namespace volreg::regress
