#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "volreg/eval/split.hpp"
#include "volreg/store/table.hpp"

namespace volreg::eval {

enum class Target { VFI, MD };

std::string to_string(Target t);
Target parse_target(const std::string& s);

struct FoldMetrics {
  Target target = Target::VFI;
  double pc = 0.0;  // NaN when undefined
  double rmse_standard = 0.0;
  double rmse_paper_literal = 0.0;
};

/// PC (NaN if undefined, including for a single point) and both RMSE variants.
FoldMetrics score(Target target, std::span<const double> predicted, std::span<const double> truth);

struct ResultRow {
  std::string method;
  Target target = Target::VFI;
  std::size_t fold = 0;
  double pc = 0.0;
  double rmse_standard = 0.0;
  double rmse_paper_literal = 0.0;

  bool operator==(const ResultRow&) const = default;
};

enum class Metric { PC, RmseStandard, RmsePaperLiteral };

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  std::size_t count = 0;
  std::size_t missing = 0;  // folds with an undefined value, excluded above
};

class ResultTable {
 public:
  void add(ResultRow row) { rows_.push_back(std::move(row)); }
  const std::vector<ResultRow>& rows() const { return rows_; }

  /// Methods in order of first appearance.
  std::vector<std::string> methods() const;
  /// Throws UndefinedMetric when no fold has a defined value.
  Aggregate aggregate(const std::string& method, Target target, Metric metric) const;

  /// Lines such as "RFR PC:VFI 0.735±0.090 RMSE:VFI 12.03±1.21".
  std::string summary() const;

  static const store::Schema& schema();
  store::Table to_table() const;
  static ResultTable from_table(const store::Table& t);

 private:
  std::vector<ResultRow> rows_;
};

enum class CvMode { RepeatedSplits, DisjointFolds };

using FoldRunner = std::function<std::vector<FoldMetrics>(const SplitPlan& plan, std::size_t fold)>;

/// k folds: repeated grouped splits seeded base_seed + i, or k disjoint
/// patient folds from one base_seed shuffle.
ResultTable cross_validate(const std::string& method, const FoldRunner& runner, std::span<const SplitItem> items,
                           std::size_t k, std::uint64_t base_seed, CvMode mode = CvMode::RepeatedSplits,
                           const std::array<double, 3>& ratios = {0.8, 0.1, 0.1});

}  // namespace volreg::eval
