#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "volreg/rng.hpp"

namespace volreg::eval {

using HyperParams = std::map<std::string, double>;

std::string to_string(const HyperParams& hp);

enum class Scale { Linear, Log, Integer, Choice };

struct ParamRange {
  std::string name;
  Scale scale = Scale::Linear;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> choices;  // Scale::Choice only

  bool contains(double v) const;
};

struct SearchSpace {
  std::vector<ParamRange> params;

  void validate() const;
  /// Linear and Log ranges are sampled uniformly in value or log-value,
  /// Integer ranges uniformly over [lo, hi] inclusive, Choice uniformly
  /// over its list. lo == hi always yields lo.
  HyperParams sample(Rng& rng) const;
  bool contains(const HyperParams& hp) const;
};

/// One trained configuration. Predictions are requested at most once each.
class TrialFit {
 public:
  virtual ~TrialFit() = default;
  virtual std::vector<double> predict_validation() = 0;
  virtual std::vector<double> predict_test() = 0;
};

class SearchBackend {
 public:
  virtual ~SearchBackend() = default;
  virtual std::unique_ptr<TrialFit> fit(const HyperParams& hp, std::uint64_t seed) = 0;
  virtual std::vector<double> validation_targets() const = 0;
  virtual std::vector<double> test_targets() const = 0;
};

struct TrialRecord {
  HyperParams params;
  std::uint64_t seed = 0;
  double validation_pc = 0.0;  // NaN when undefined
};

struct SearchResult {
  std::vector<TrialRecord> trials;
  std::size_t best_index = 0;
  double test_pc = 0.0;  // NaN when undefined
  double test_rmse = 0.0;
  double test_rmse_paper_literal = 0.0;
  std::vector<double> test_predictions;
};

/// Samples `trials` configurations up front, fits each, keeps the one with the
/// highest validation PC (first on ties; undefined PC never wins) and queries
/// test predictions for that configuration only. Throws UndefinedMetric if no
/// trial has a defined validation PC.
SearchResult random_search(SearchBackend& backend, const SearchSpace& space, std::size_t trials, std::uint64_t seed);

}  // namespace volreg::eval
