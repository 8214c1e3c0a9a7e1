#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace surrogate {

// Per-unit metric columns sharing one sorted unit roster.
struct MetricTable {
  std::string unit_kind;
  std::vector<std::string> unit_ids;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> values;  // values[column][row]

  std::size_t rows() const { return unit_ids.size(); }
  const std::vector<double>& column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  void add_column(std::string name, std::vector<double> data);
};

// CSV: header "unit_id,<col>,...", one row per unit.
void write_metric_table(std::ostream& out, const MetricTable& table);
MetricTable read_metric_table(std::istream& in, const std::string& unit_kind = "");

// unit_id -> arm label
using Assignment = std::map<std::string, std::string>;

void write_assignment(std::ostream& out, const Assignment& assignment);
Assignment read_assignment(std::istream& in);

std::string format_double(double v);

}  // namespace surrogate
