#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace volreg::eval {

enum class Partition : std::uint8_t { Train = 0, Validation = 1, Test = 2 };

std::string to_string(Partition p);

struct SplitItem {
  std::string scan_id;
  std::string patient_id;
};

struct SplitPlan {
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  /// Partition of each input item, in input order.
  std::vector<Partition> assignment;

  /// Input indices of one partition, ascending.
  std::vector<std::size_t> indices(Partition p) const;
  std::size_t count(Partition p) const;
  /// scan_id -> partition.
  std::map<std::string, Partition> by_scan(std::span<const SplitItem> items) const;
};

/// Patients are shuffled by the seed and each is placed, with all of its
/// scans, into the partition whose scan count lags its target the most. If a
/// partition ends up empty, the most recently placed patient of the largest
/// partition is moved into it.
SplitPlan grouped_split(std::span<const SplitItem> items, const std::array<double, 3>& ratios, std::uint64_t seed);

/// Disjoint alternative: patients are dealt into k groups; group `fold` is
/// the test set, and the rest is divided into train and validation by the
/// ratio of those two entries.
SplitPlan disjoint_fold_split(std::span<const SplitItem> items, std::size_t k, std::size_t fold,
                              const std::array<double, 3>& ratios, std::uint64_t seed);

}  // namespace volreg::eval
