#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "volreg/store/table.hpp"

namespace volreg::regress {

inline constexpr std::size_t kFeatureCount = 22;

/// rnfl_clock_1..12, rnfl_quadrant_S/I/N/T, rnfl_avg (um), rim_area,
/// disc_area (mm^2), cdr_avg, cdr_vertical (ratio), cup_volume (mm^3).
const std::array<std::string, kFeatureCount>& feature_names();

struct FeatureRow {
  std::string scan_id;
  std::array<double, kFeatureCount> values{};

  bool operator==(const FeatureRow&) const = default;
};

/// scan_id followed by the 22 features, with their value ranges.
const store::Schema& feature_schema();

store::Table features_to_table(std::span<const FeatureRow> rows);
std::vector<FeatureRow> features_from_table(const store::Table& t);

void write_features(std::span<const FeatureRow> rows, const std::filesystem::path& path);
std::vector<FeatureRow> read_features(const std::filesystem::path& path);

}  // namespace volreg::regress
