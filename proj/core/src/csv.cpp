#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "vaxcast/data.hpp"
#include "vaxcast/error.hpp"

namespace vaxcast {
namespace {

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool is_missing_cell(std::string_view cell) { return cell.empty() || cell == "NA"; }

double parse_number(std::string_view cell, std::size_t line_no, std::string_view column, const std::string& origin) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value))
    throw ParseError(origin + ": non-numeric cell '" + std::string(cell) + "' at row " + std::to_string(line_no) +
                     ", column '" + std::string(column) + "'");
  return value;
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

Dataset read_csv(std::istream& in, const Schema& schema, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(origin + ": empty file (no header row)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  enum class Role { feature, year, outcome, weight };
  struct Column {
    Role role;
    std::size_t feature = 0;
    std::string name;
  };
  std::vector<Column> layout;
  std::vector<bool> seen_feature(schema.size(), false);
  bool seen_year = false, seen_outcome = false, seen_weight = false;
  for (auto raw : split_line(line)) {
    const std::string name(trim(raw));
    Column col{Role::feature, 0, name};
    bool duplicate = false;
    if (auto j = schema.index_of(name)) {
      col.feature = *j;
      duplicate = seen_feature[*j];
      seen_feature[*j] = true;
    } else if (name == "year") {
      col.role = Role::year;
      duplicate = std::exchange(seen_year, true);
    } else if (name == schema.outcome_name()) {
      col.role = Role::outcome;
      duplicate = std::exchange(seen_outcome, true);
    } else if (name == "weight") {
      col.role = Role::weight;
      duplicate = std::exchange(seen_weight, true);
    } else {
      throw SchemaMismatchError(origin + ": header column '" + name + "' is not in the schema");
    }
    if (duplicate) throw SchemaMismatchError(origin + ": header column '" + name + "' appears twice");
    layout.push_back(std::move(col));
  }
  for (std::size_t j = 0; j < schema.size(); ++j)
    if (!seen_feature[j])
      throw SchemaMismatchError(origin + ": header lacks schema column '" + schema.feature(j).name + "'");
  if (!seen_year) throw SchemaMismatchError(origin + ": header lacks column 'year'");
  if (!seen_outcome) throw SchemaMismatchError(origin + ": header lacks column '" + schema.outcome_name() + "'");

  std::vector<std::vector<double>> columns(schema.size());
  std::vector<double> outcome;
  std::vector<int> years;
  std::vector<double> weights;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != layout.size())
      throw ParseError(origin + ": row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                       " cells, header has " + std::to_string(layout.size()));
    double weight = 1.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto cell = trim(cells[c]);
      const auto& col = layout[c];
      const double v = is_missing_cell(cell) ? kMissing : parse_number(cell, line_no, col.name, origin);
      switch (col.role) {
        case Role::feature:
          columns[col.feature].push_back(v);
          break;
        case Role::outcome:
          outcome.push_back(v);
          break;
        case Role::year:
          if (is_missing(v) || v != std::floor(v))
            throw ParseError(origin + ": invalid year at row " + std::to_string(line_no));
          years.push_back(static_cast<int>(v));
          break;
        case Role::weight:
          if (!is_missing(v)) weight = v;
          break;
      }
    }
    weights.push_back(weight);
  }
  try {
    return Dataset(schema, std::move(columns), std::move(outcome), std::move(years), std::move(weights),
                   Source::ingested);
  } catch (const SchemaMismatchError& e) {
    throw SchemaMismatchError(origin + ": " + e.what());
  }
}

Dataset read_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "' for reading");
  return read_csv(in, schema, path);
}

void write_csv(std::ostream& out, const Dataset& data) {
  const auto& schema = data.schema();
  std::string buf;
  for (const auto& f : schema.features()) {
    buf += f.name;
    buf += ',';
  }
  buf += "year,";
  buf += schema.outcome_name();
  const bool weighted = std::any_of(data.weights().begin(), data.weights().end(), [](double w) { return w != 1.0; });
  if (weighted) buf += ",weight";
  buf += '\n';
  out << buf;
  for (std::size_t i = 0; i < data.size(); ++i) {
    buf.clear();
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const double v = data.value(i, j);
      if (is_missing(v))
        buf += "NA";
      else
        append_number(buf, v);
      buf += ',';
    }
    buf += std::to_string(data.years()[i]);
    buf += ',';
    const double y = data.outcome()[i];
    buf += is_missing(y) ? "NA" : (y != 0.0 ? "1" : "0");
    if (weighted) {
      buf += ',';
      append_number(buf, data.weights()[i]);
    }
    buf += '\n';
    out << buf;
  }
}

void write_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  write_csv(out, data);
  if (!out) throw ParseError("write to '" + path + "' failed");
}

}  // namespace vaxcast
