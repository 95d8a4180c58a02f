#include "volreg/store/table.hpp"

#include <cmath>

#include "volreg/common.hpp"
#include "volreg/store/binary.hpp"
#include "volreg/store/container.hpp"

namespace volreg::store {

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].name == name) return i;
  }
  throw InvalidArgument("table has no column '" + name + "'");
}

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != schema.size()) {
    throw InvalidArgument("row has " + std::to_string(row.size()) + " cells, schema has " +
                          std::to_string(schema.size()) + " columns");
  }
  for (std::size_t c = 0; c < row.size(); ++c) {
    const bool is_text = std::holds_alternative<std::string>(row[c]);
    if (is_text != (schema[c].kind == CellKind::Text)) {
      throw InvalidArgument("cell type does not match column '" + schema[c].name + "'");
    }
  }
  rows.push_back(std::move(row));
}

namespace {

void check_text(const std::string& s, const std::string& column) {
  if (s.find_first_of(",\"\r\n") != std::string::npos) {
    throw InvalidArgument("text in column '" + column + "' contains a comma, quote or line break");
  }
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

std::string format_table(const Table& t) {
  std::string out;
  for (std::size_t c = 0; c < t.schema.size(); ++c) {
    check_text(t.schema[c].name, t.schema[c].name);
    out += (c ? "," : "") + t.schema[c].name;
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      if (const auto* s = std::get_if<std::string>(&row[c])) {
        check_text(*s, t.schema[c].name);
        out += *s;
      } else {
        out += format_number(std::get<double>(row[c]));
      }
    }
    out += '\n';
  }
  return out;
}

Table parse_table(const std::string& text, const Schema& schema) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw SchemaError("table is empty; expected a header", -1, 0);

  const auto header = split(lines[0]);
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (c >= header.size()) throw SchemaError("missing column '" + schema[c].name + "'", -1, static_cast<std::ptrdiff_t>(c));
    if (header[c] != schema[c].name) {
      throw SchemaError("header column '" + header[c] + "' where '" + schema[c].name + "' was expected", -1,
                        static_cast<std::ptrdiff_t>(c));
    }
  }
  if (header.size() > schema.size()) {
    throw SchemaError("unexpected extra column '" + header[schema.size()] + "'", -1,
                      static_cast<std::ptrdiff_t>(schema.size()));
  }

  Table t;
  t.schema = schema;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto row_index = static_cast<std::ptrdiff_t>(l - 1);
    const auto cells = split(lines[l]);
    if (cells.size() != schema.size()) {
      throw SchemaError("row has " + std::to_string(cells.size()) + " cells, expected " + std::to_string(schema.size()),
                        row_index, static_cast<std::ptrdiff_t>(std::min(cells.size(), schema.size())));
    }
    std::vector<Cell> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const Column& col = schema[c];
      const auto col_index = static_cast<std::ptrdiff_t>(c);
      if (col.kind == CellKind::Text) {
        row.emplace_back(cells[c]);
        continue;
      }
      const auto v = parse_number(cells[c]);
      if (!v) throw SchemaError("column '" + col.name + "' has non-numeric value '" + cells[c] + "'", row_index, col_index);
      if (std::isnan(*v)) {
        if (!col.allow_nan) throw SchemaError("column '" + col.name + "' may not be nan", row_index, col_index);
      } else if (*v < col.min || *v > col.max) {
        throw SchemaError("column '" + col.name + "' value " + cells[c] + " outside [" + format_number(col.min) + ", " +
                              format_number(col.max) + "]",
                          row_index, col_index);
      }
      row.emplace_back(*v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_table(const Table& t, const std::filesystem::path& path) { write_file(path, format_table(t)); }

Table read_table(const std::filesystem::path& path, const Schema& schema) {
  const Bytes bytes = read_file(path);
  return parse_table(std::string(bytes.begin(), bytes.end()), schema);
}

}  // namespace volreg::store
