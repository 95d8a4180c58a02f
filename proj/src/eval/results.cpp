#include "volreg/eval/results.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "volreg/common.hpp"
#include "volreg/eval/metrics.hpp"

namespace volreg::eval {

std::string to_string(Target t) { return t == Target::VFI ? "VFI" : "MD"; }

Target parse_target(const std::string& s) {
  if (s == "VFI" || s == "vfi") return Target::VFI;
  if (s == "MD" || s == "md") return Target::MD;
  throw InvalidArgument("unknown target '" + s + "'");
}

FoldMetrics score(Target target, std::span<const double> predicted, std::span<const double> truth) {
  FoldMetrics m;
  m.target = target;
  m.pc = pearson_or_nan(predicted, truth);
  m.rmse_standard = rmse(predicted, truth, RmseVariant::Standard);
  m.rmse_paper_literal = rmse(predicted, truth, RmseVariant::PaperLiteral);
  return m;
}

std::vector<std::string> ResultTable::methods() const {
  std::vector<std::string> out;
  for (const auto& r : rows_) {
    if (std::find(out.begin(), out.end(), r.method) == out.end()) out.push_back(r.method);
  }
  return out;
}

Aggregate ResultTable::aggregate(const std::string& method, Target target, Metric metric) const {
  std::vector<double> values;
  Aggregate a;
  for (const auto& r : rows_) {
    if (r.method != method || r.target != target) continue;
    const double v = metric == Metric::PC ? r.pc : metric == Metric::RmseStandard ? r.rmse_standard : r.rmse_paper_literal;
    if (std::isnan(v)) {
      ++a.missing;
    } else {
      values.push_back(v);
    }
  }
  if (values.empty()) throw UndefinedMetric("no defined values for " + method + " " + to_string(target));
  a.count = values.size();
  a.mean = mean(values);
  a.std = sample_std(values);
  return a;
}

namespace {

std::string pm(const Aggregate& a, int decimals) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.*f±%.*f", decimals, a.mean, decimals, a.std);
  return buf;
}

}  // namespace

std::string ResultTable::summary() const {
  std::string out;
  for (const auto& method : methods()) {
    for (Target target : {Target::VFI, Target::MD}) {
      bool present = false;
      for (const auto& r : rows_) present |= r.method == method && r.target == target;
      if (!present) continue;
      out += method;
      std::size_t missing = 0;
      try {
        const Aggregate pc = aggregate(method, target, Metric::PC);
        out += " PC:" + to_string(target) + " " + pm(pc, 3);
        missing = pc.missing;
      } catch (const UndefinedMetric&) {
        out += " PC:" + to_string(target) + " undefined";
      }
      out += " RMSE:" + to_string(target) + " " + pm(aggregate(method, target, Metric::RmseStandard), 2);
      if (missing) out += " (" + std::to_string(missing) + " folds with undefined PC excluded)";
      out += '\n';
    }
  }
  return out;
}

const store::Schema& ResultTable::schema() {
  static const store::Schema s = {
      {"method", store::CellKind::Text},
      {"target", store::CellKind::Text},
      {"fold", store::CellKind::Real, 0.0},
      {"pc", store::CellKind::Real, -1.0, 1.0, true},
      {"rmse_standard", store::CellKind::Real, 0.0},
      {"rmse_paper_literal", store::CellKind::Real, 0.0},
  };
  return s;
}

store::Table ResultTable::to_table() const {
  store::Table t;
  t.schema = schema();
  for (const auto& r : rows_) {
    t.add_row({r.method, to_string(r.target), static_cast<double>(r.fold), r.pc, r.rmse_standard, r.rmse_paper_literal});
  }
  return t;
}

ResultTable ResultTable::from_table(const store::Table& t) {
  ResultTable out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    ResultRow r;
    r.method = t.text(i, 0);
    try {
      r.target = parse_target(t.text(i, 1));
    } catch (const InvalidArgument& e) {
      throw SchemaError(e.what(), static_cast<std::ptrdiff_t>(i), 1);
    }
    r.fold = static_cast<std::size_t>(t.real(i, 2));
    r.pc = t.real(i, 3);
    r.rmse_standard = t.real(i, 4);
    r.rmse_paper_literal = t.real(i, 5);
    out.add(std::move(r));
  }
  return out;
}

ResultTable cross_validate(const std::string& method, const FoldRunner& runner, std::span<const SplitItem> items,
                           std::size_t k, std::uint64_t base_seed, CvMode mode, const std::array<double, 3>& ratios) {
  if (k < 2) throw InvalidArgument("cross validation needs k >= 2");
  std::vector<SplitPlan> plans;
  for (std::size_t i = 0; i < k; ++i) {
    plans.push_back(mode == CvMode::RepeatedSplits ? grouped_split(items, ratios, base_seed + i)
                                                   : disjoint_fold_split(items, k, i, ratios, base_seed));
  }
  std::vector<std::vector<FoldMetrics>> outcomes(k);
  parallel_for(k, [&](std::size_t i) { outcomes[i] = runner(plans[i], i); });
  ResultTable table;
  for (std::size_t i = 0; i < k; ++i) {
    for (const auto& m : outcomes[i]) {
      table.add({method, m.target, i, m.pc, m.rmse_standard, m.rmse_paper_literal});
    }
  }
  return table;
}

}  // namespace volreg::eval
