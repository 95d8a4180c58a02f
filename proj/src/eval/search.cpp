#include "volreg/eval/search.hpp"

#include <cmath>
#include <limits>

#include "volreg/common.hpp"
#include "volreg/eval/metrics.hpp"
#include "volreg/store/container.hpp"

namespace volreg::eval {

std::string to_string(const HyperParams& hp) {
  std::string s;
  for (const auto& [k, v] : hp) {
    if (!s.empty()) s += ' ';
    s += k + "=" + store::format_number(v);
  }
  return s;
}

bool ParamRange::contains(double v) const {
  if (!std::isfinite(v)) return false;
  switch (scale) {
    case Scale::Choice:
      for (double c : choices) {
        if (c == v) return true;
      }
      return false;
    case Scale::Integer:
      return v == std::round(v) && v >= lo && v <= hi;
    default:
      return v >= lo && v <= hi;
  }
}

void SearchSpace::validate() const {
  if (params.empty()) throw InvalidArgument("search space is empty");
  for (const auto& p : params) {
    if (p.scale == Scale::Choice) {
      if (p.choices.empty()) throw InvalidArgument("choice parameter '" + p.name + "' has no options");
      continue;
    }
    if (!(p.lo <= p.hi)) throw InvalidArgument("parameter '" + p.name + "' has lo > hi");
    if (p.scale == Scale::Log && !(p.lo > 0.0)) throw InvalidArgument("log-scaled parameter '" + p.name + "' needs lo > 0");
    if (p.scale == Scale::Integer && (p.lo != std::round(p.lo) || p.hi != std::round(p.hi))) {
      throw InvalidArgument("integer parameter '" + p.name + "' needs integral bounds");
    }
  }
}

HyperParams SearchSpace::sample(Rng& rng) const {
  HyperParams hp;
  for (const auto& p : params) {
    double v = p.lo;
    switch (p.scale) {
      case Scale::Linear:
        v = p.lo == p.hi ? p.lo : rng.uniform(p.lo, p.hi);
        break;
      case Scale::Log:
        v = p.lo == p.hi ? p.lo : std::exp(rng.uniform(std::log(p.lo), std::log(p.hi)));
        v = std::min(std::max(v, p.lo), p.hi);
        break;
      case Scale::Integer:
        v = static_cast<double>(rng.uniform_int(static_cast<std::int64_t>(p.lo), static_cast<std::int64_t>(p.hi)));
        break;
      case Scale::Choice:
        v = p.choices[rng.index(p.choices.size())];
        break;
    }
    hp[p.name] = v;
  }
  return hp;
}

bool SearchSpace::contains(const HyperParams& hp) const {
  if (hp.size() != params.size()) return false;
  for (const auto& p : params) {
    const auto it = hp.find(p.name);
    if (it == hp.end() || !p.contains(it->second)) return false;
  }
  return true;
}

SearchResult random_search(SearchBackend& backend, const SearchSpace& space, std::size_t trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidArgument("random search needs at least one trial");
  space.validate();
  SearchResult result;
  Rng rng(derive_seed(seed, 0x736561726368));
  for (std::size_t t = 0; t < trials; ++t) {
    TrialRecord rec;
    rec.params = space.sample(rng);
    rec.seed = derive_seed(seed, t);
    result.trials.push_back(std::move(rec));
  }

  const std::vector<double> val_y = backend.validation_targets();
  std::unique_ptr<TrialFit> best_fit;
  double best_pc = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t t = 0; t < trials; ++t) {
    auto fit = backend.fit(result.trials[t].params, result.trials[t].seed);
    const std::vector<double> pred = fit->predict_validation();
    const double pc = pearson_or_nan(pred, val_y);
    result.trials[t].validation_pc = pc;
    if (!std::isnan(pc) && (!any || pc > best_pc)) {
      any = true;
      best_pc = pc;
      result.best_index = t;
      best_fit = std::move(fit);
    }
  }
  if (!any) throw UndefinedMetric("every search trial produced an undefined validation PC");

  result.test_predictions = best_fit->predict_test();
  const std::vector<double> test_y = backend.test_targets();
  result.test_pc = pearson_or_nan(result.test_predictions, test_y);
  result.test_rmse = rmse(result.test_predictions, test_y, RmseVariant::Standard);
  result.test_rmse_paper_literal = rmse(result.test_predictions, test_y, RmseVariant::PaperLiteral);
  return result;
}

}  // namespace volreg::eval
