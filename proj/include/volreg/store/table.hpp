#pragma once

// Comma-separated tables with an exact header. Cells never contain commas,
// quotes or line breaks; writers reject such text instead of quoting it.

#include <filesystem>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace volreg::store {

enum class CellKind { Text, Real };

struct Column {
  std::string name;
  CellKind kind = CellKind::Real;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
  /// Allows "nan" in real columns (used for missing metrics).
  bool allow_nan = false;
};

using Schema = std::vector<Column>;
using Cell = std::variant<std::string, double>;

struct Table {
  Schema schema;
  std::vector<std::vector<Cell>> rows;

  std::size_t column(const std::string& name) const;
  double real(std::size_t row, std::size_t col) const { return std::get<double>(rows.at(row).at(col)); }
  const std::string& text(std::size_t row, std::size_t col) const { return std::get<std::string>(rows.at(row).at(col)); }
  void add_row(std::vector<Cell> row);
};

/// Serialized text; reals use the shortest round-trip representation.
std::string format_table(const Table& t);

/// Parses text against the schema. Errors are SchemaError with a 0-based data
/// row (-1 for the header) and 0-based column.
Table parse_table(const std::string& text, const Schema& schema);

void write_table(const Table& t, const std::filesystem::path& path);
Table read_table(const std::filesystem::path& path, const Schema& schema);

}  // namespace volreg::store
