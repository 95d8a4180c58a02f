#include "volreg/regress/features.hpp"

#include <cmath>

#include "volreg/common.hpp"

namespace volreg::regress {

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = [] {
    std::array<std::string, kFeatureCount> n;
    for (int h = 0; h < 12; ++h) n[h] = "rnfl_clock_" + std::to_string(h + 1);
    n[12] = "rnfl_quadrant_S";
    n[13] = "rnfl_quadrant_I";
    n[14] = "rnfl_quadrant_N";
    n[15] = "rnfl_quadrant_T";
    n[16] = "rnfl_avg";
    n[17] = "rim_area";
    n[18] = "disc_area";
    n[19] = "cdr_avg";
    n[20] = "cdr_vertical";
    n[21] = "cup_volume";
    return n;
  }();
  return names;
}

const store::Schema& feature_schema() {
  static const store::Schema schema = [] {
    store::Schema s;
    s.push_back({"scan_id", store::CellKind::Text});
    const auto& names = feature_names();
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      store::Column c{names[i], store::CellKind::Real, 0.0};
      if (names[i] == "cdr_avg" || names[i] == "cdr_vertical") c.max = 1.5;
      s.push_back(c);
    }
    return s;
  }();
  return schema;
}

store::Table features_to_table(std::span<const FeatureRow> rows) {
  store::Table t;
  t.schema = feature_schema();
  for (const auto& r : rows) {
    std::vector<store::Cell> cells{r.scan_id};
    for (double v : r.values) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite feature in scan '" + r.scan_id + "'");
      cells.emplace_back(v);
    }
    t.add_row(std::move(cells));
  }
  return t;
}

std::vector<FeatureRow> features_from_table(const store::Table& t) {
  std::vector<FeatureRow> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    FeatureRow r;
    r.scan_id = t.text(i, 0);
    for (std::size_t f = 0; f < kFeatureCount; ++f) r.values[f] = t.real(i, f + 1);
    out.push_back(std::move(r));
  }
  return out;
}

void write_features(std::span<const FeatureRow> rows, const std::filesystem::path& path) {
  store::write_table(features_to_table(rows), path);
}

std::vector<FeatureRow> read_features(const std::filesystem::path& path) {
  return features_from_table(store::read_table(path, feature_schema()));
}

}  // namespace volreg::regress
