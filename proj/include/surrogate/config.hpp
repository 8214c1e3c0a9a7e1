#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "surrogate/simulator.hpp"

namespace surrogate {

// Key-value text config: one "key = value" per line, '#' starts a comment,
// lists are comma separated. Later keys override earlier ones.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& source = "<config>");
  static ConfigFile load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  // Throws config naming the first key outside `known`.
  void require_known(const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  // Sorted "key = value" lines; parse(to_text()) round-trips.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
  std::string source_;
};

const std::set<std::string>& simulator_keys();

// Fills a SimConfig from the simulator keys, starting from `base`.
SimConfig sim_config_from(const ConfigFile& file, SimConfig base = {});

GridSplit grid_split_from(const ConfigFile& file, const SimConfig& config);

}  // namespace surrogate
