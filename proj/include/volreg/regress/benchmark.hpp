#pragma once

// Glue between feature tables, patient-grouped splits and the search harness.

#include <span>
#include <vector>

#include "volreg/eval/search.hpp"
#include "volreg/eval/split.hpp"
#include "volreg/regress/features.hpp"
#include "volreg/regress/model.hpp"

namespace volreg::regress {

struct SplitData {
  Matrix X_train, X_validation, X_test;
  Vector y_train, y_validation, y_test;
};

Matrix feature_matrix(std::span<const FeatureRow> rows, std::span<const std::size_t> indices);
SplitData split_data(std::span<const FeatureRow> rows, std::span<const double> targets, const eval::SplitPlan& plan);

/// Fits a Pipeline per trial on the training rows.
class PipelineBackend final : public eval::SearchBackend {
 public:
  PipelineBackend(RegressorKind kind, const SplitData& data) : kind_(kind), data_(data) {}

  std::unique_ptr<eval::TrialFit> fit(const eval::HyperParams& hp, std::uint64_t seed) override;
  std::vector<double> validation_targets() const override;
  std::vector<double> test_targets() const override;

 private:
  RegressorKind kind_;
  const SplitData& data_;
};

}  // namespace volreg::regress
