#include "surrogate/metric_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "surrogate/error.hpp"
#include "surrogate/io.hpp"

namespace surrogate {

const std::vector<double>& MetricTable::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) fail(ErrorKind::not_found, "metric column '" + name + "' not found");
  return values[static_cast<std::size_t>(it - columns.begin())];
}

bool MetricTable::has_column(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

void MetricTable::add_column(std::string name, std::vector<double> data) {
  if (data.size() != unit_ids.size()) fail(ErrorKind::invalid_argument, "column '" + name + "' has wrong length");
  if (has_column(name)) fail(ErrorKind::invalid_argument, "duplicate column '" + name + "'");
  columns.push_back(std::move(name));
  values.push_back(std::move(data));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

namespace {

double parse_cell(const std::string& s, std::size_t line) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    fail(ErrorKind::parse, "line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

void write_metric_table(std::ostream& out, const MetricTable& table) {
  out << "unit_id";
  for (const auto& c : table.columns) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out << table.unit_ids[r];
    for (const auto& col : table.values) out << ',' << format_double(col[r]);
    out << '\n';
  }
}

MetricTable read_metric_table(std::istream& in, const std::string& unit_kind) {
  MetricTable table;
  table.unit_kind = unit_kind;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (table.columns.empty() && lineno == 1) {
      if (cells.empty() || cells[0] != "unit_id") fail(ErrorKind::parse, "metric table header must start with unit_id");
      table.columns.assign(cells.begin() + 1, cells.end());
      table.values.resize(table.columns.size());
      continue;
    }
    if (cells.size() != table.columns.size() + 1)
      fail(ErrorKind::parse, "line " + std::to_string(lineno) + ": expected " +
                                 std::to_string(table.columns.size() + 1) + " cells");
    table.unit_ids.push_back(cells[0]);
    for (std::size_t c = 0; c < table.columns.size(); ++c) table.values[c].push_back(parse_cell(cells[c + 1], lineno));
  }
  return table;
}

void write_assignment(std::ostream& out, const Assignment& assignment) {
  out << "unit_id,arm\n";
  for (const auto& [unit, arm] : assignment) out << unit << ',' << arm << '\n';
}

Assignment read_assignment(std::istream& in) {
  Assignment a;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (lineno == 1 && line.rfind("unit_id", 0) == 0)) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 2) fail(ErrorKind::parse, "assignment line " + std::to_string(lineno) + ": expected 2 cells");
    a[cells[0]] = cells[1];
  }
  return a;
}

}  // namespace surrogate
