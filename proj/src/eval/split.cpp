#include "volreg/eval/split.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "volreg/common.hpp"
#include "volreg/rng.hpp"

namespace volreg::eval {

std::string to_string(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Validation: return "val";
    case Partition::Test: return "test";
  }
  return "?";
}

std::vector<std::size_t> SplitPlan::indices(Partition p) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == p) out.push_back(i);
  }
  return out;
}

std::size_t SplitPlan::count(Partition p) const {
  return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), p));
}

std::map<std::string, Partition> SplitPlan::by_scan(std::span<const SplitItem> items) const {
  if (items.size() != assignment.size()) throw InvalidArgument("split plan does not match the item list");
  std::map<std::string, Partition> out;
  for (std::size_t i = 0; i < items.size(); ++i) out[items[i].scan_id] = assignment[i];
  return out;
}

namespace {

struct PatientGroups {
  std::vector<std::string> ids;                   // first-appearance order
  std::vector<std::vector<std::size_t>> members;  // item indices per patient
};

PatientGroups group_patients(std::span<const SplitItem> items) {
  PatientGroups g;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto [it, inserted] = index.try_emplace(items[i].patient_id, g.ids.size());
    if (inserted) {
      g.ids.push_back(items[i].patient_id);
      g.members.emplace_back();
    }
    g.members[it->second].push_back(i);
  }
  return g;
}

void check_ratios(const std::array<double, 3>& ratios) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw InvalidArgument("split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("split ratios must sum to 1");
}

/// Greedy deficit assignment of the given patients (in order) to `parts`
/// partitions with target fractions `weights`; returns the partition of each
/// patient.
std::vector<std::size_t> deal(const PatientGroups& g, const std::vector<std::size_t>& order,
                              const std::vector<double>& weights) {
  const std::size_t parts = weights.size();
  double total = 0.0;
  for (std::size_t p : order) total += static_cast<double>(g.members[p].size());
  std::vector<double> filled(parts, 0.0);
  std::vector<std::vector<std::size_t>> placed(parts);
  std::vector<std::size_t> where(g.ids.size(), 0);
  for (std::size_t p : order) {
    std::size_t best = 0;
    double best_deficit = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < parts; ++k) {
      const double deficit = weights[k] * total - filled[k];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = k;
      }
    }
    where[p] = best;
    placed[best].push_back(p);
    filled[best] += static_cast<double>(g.members[p].size());
  }
  for (std::size_t k = 0; k < parts; ++k) {
    if (!placed[k].empty()) continue;
    std::size_t donor = 0;
    for (std::size_t j = 1; j < parts; ++j) {
      if (placed[j].size() > placed[donor].size()) donor = j;
    }
    const std::size_t moved = placed[donor].back();
    placed[donor].pop_back();
    placed[k].push_back(moved);
    where[moved] = k;
  }
  return where;
}

}  // namespace

SplitPlan grouped_split(std::span<const SplitItem> items, const std::array<double, 3>& ratios, std::uint64_t seed) {
  check_ratios(ratios);
  const PatientGroups g = group_patients(items);
  if (g.ids.size() < 3) {
    throw InvalidArgument("grouped split needs at least 3 patients, got " + std::to_string(g.ids.size()));
  }
  std::vector<std::size_t> order(g.ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x73706C6974));
  rng.shuffle(order);
  const auto where = deal(g, order, {ratios[0], ratios[1], ratios[2]});
  SplitPlan plan;
  plan.seed = seed;
  plan.ratios = ratios;
  plan.assignment.assign(items.size(), Partition::Train);
  for (std::size_t p = 0; p < g.ids.size(); ++p) {
    for (std::size_t i : g.members[p]) plan.assignment[i] = static_cast<Partition>(where[p]);
  }
  return plan;
}

SplitPlan disjoint_fold_split(std::span<const SplitItem> items, std::size_t k, std::size_t fold,
                              const std::array<double, 3>& ratios, std::uint64_t seed) {
  check_ratios(ratios);
  if (k < 2) throw InvalidArgument("disjoint folds need k >= 2");
  if (fold >= k) throw InvalidArgument("fold index out of range");
  const PatientGroups g = group_patients(items);
  if (g.ids.size() < k + 1) throw InvalidArgument("not enough patients for " + std::to_string(k) + " disjoint folds");
  std::vector<std::size_t> order(g.ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x666F6C64));
  rng.shuffle(order);
  const auto group = deal(g, order, std::vector<double>(k, 1.0 / static_cast<double>(k)));

  std::vector<std::size_t> rest;
  for (std::size_t p : order) {
    if (group[p] != fold) rest.push_back(p);
  }
  const double train_share = ratios[0] / (ratios[0] + ratios[1]);
  const auto tv = deal(g, rest, {train_share, 1.0 - train_share});

  SplitPlan plan;
  plan.seed = seed;
  plan.ratios = ratios;
  plan.assignment.assign(items.size(), Partition::Train);
  for (std::size_t p = 0; p < g.ids.size(); ++p) {
    const Partition part = group[p] == fold ? Partition::Test : (tv[p] == 0 ? Partition::Train : Partition::Validation);
    for (std::size_t i : g.members[p]) plan.assignment[i] = part;
  }
  return plan;
}

}  // namespace volreg::eval
