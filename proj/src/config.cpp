#include "surrogate/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "surrogate/error.hpp"
#include "surrogate/io.hpp"

namespace surrogate {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || p != end) fail(ErrorKind::config, key + ": not a number: '" + text + "'");
  return v;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& source) {
  ConfigFile f;
  f.source_ = source;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::config, source + ":" + std::to_string(n) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) fail(ErrorKind::config, source + ":" + std::to_string(n) + ": empty key");
    f.values_[key] = trim(line.substr(eq + 1));
  }
  return f;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::config, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::optional<std::string> ConfigFile::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  return v ? to_double(key, *v) : fallback;
}

std::int64_t ConfigFile::get_int(const std::string& key, std::int64_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  const auto* end = v->data() + v->size();
  const auto [p, ec] = std::from_chars(v->data(), end, out);
  if (ec != std::errc{} || p != end) fail(ErrorKind::config, key + ": not an integer: '" + *v + "'");
  return out;
}

std::uint64_t ConfigFile::get_uint(const std::string& key, std::uint64_t fallback) const {
  const auto v = get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) fail(ErrorKind::config, key + ": must be nonnegative");
  return static_cast<std::uint64_t>(v);
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  fail(ErrorKind::config, key + ": expected true or false");
}

std::vector<double> ConfigFile::get_list(const std::string& key, const std::vector<double>& fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_csv_line(*v)) out.push_back(to_double(key, trim(item)));
  return out;
}

std::string ConfigFile::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void ConfigFile::require_known(const std::set<std::string>& known) const {
  for (const auto& [k, v] : values_) {
    if (!known.count(k)) fail(ErrorKind::config, source_ + ": unknown key '" + k + "'");
  }
}

const std::set<std::string>& simulator_keys() {
  static const std::set<std::string> keys = {
      "n_users",           "n_listings",          "n_locations",       "horizon_days",
      "start_date",        "lookback_days",       "seed",              "id_prefix",
      "searches_per_user", "consideration_set",   "results_per_search", "click_base",
      "position_decay",    "relevance_click",     "search_noise",      "dated_share",
      "base_engagement_rates", "base_dwell_seconds", "relevance_engagement", "depth_profile",
      "treatment_effect",  "treatment_share",     "propensity_intercept", "propensity_weights",
      "exogenous_dropout", "alpha",               "beta",              "alpha_grid",
      "beta_grid",         "focus_depth_days",    "focus_view_days",   "focus_depth_boost",
      "focus_view_boost",  "truth_mc",            "grid_cell_share",
  };
  return keys;
}

SimConfig sim_config_from(const ConfigFile& f, SimConfig c) {
  c.n_users = f.get_uint("n_users", c.n_users);
  c.n_listings = f.get_uint("n_listings", c.n_listings);
  c.n_locations = f.get_uint("n_locations", c.n_locations);
  c.horizon_days = static_cast<int>(f.get_int("horizon_days", c.horizon_days));
  if (const auto d = f.get("start_date")) {
    const auto date = parse_date(*d);
    if (!date) fail(ErrorKind::config, "start_date: expected YYYY-MM-DD");
    c.start_ms = static_cast<TimestampMs>(date->time_since_epoch().count()) * kMsPerDay;
  }
  c.lookback_ms = f.get_int("lookback_days", c.lookback_ms / kMsPerDay) * kMsPerDay;
  c.seed = f.get_uint("seed", c.seed);
  c.id_prefix = f.get_string("id_prefix", c.id_prefix);
  c.searches_per_user = f.get_double("searches_per_user", c.searches_per_user);
  c.consideration_set = f.get_uint("consideration_set", c.consideration_set);
  c.results_per_search = f.get_uint("results_per_search", c.results_per_search);
  c.click_base = f.get_double("click_base", c.click_base);
  c.position_decay = f.get_double("position_decay", c.position_decay);
  c.relevance_click = f.get_double("relevance_click", c.relevance_click);
  c.search_noise = f.get_double("search_noise", c.search_noise);
  c.dated_share = f.get_double("dated_share", c.dated_share);
  const auto rates = f.get_list("base_engagement_rates",
                                {c.base_engagement_rates.begin(), c.base_engagement_rates.end()});
  if (rates.size() != c.base_engagement_rates.size()) {
    fail(ErrorKind::config, "base_engagement_rates needs 6 values");
  }
  std::copy(rates.begin(), rates.end(), c.base_engagement_rates.begin());
  c.base_dwell_seconds = f.get_double("base_dwell_seconds", c.base_dwell_seconds);
  c.relevance_engagement = f.get_double("relevance_engagement", c.relevance_engagement);
  c.depth_profile = f.get_list("depth_profile", c.depth_profile);
  c.treatment_effect = f.get_double("treatment_effect", c.treatment_effect);
  c.treatment_share = f.get_double("treatment_share", c.treatment_share);
  c.propensity_intercept = f.get_double("propensity_intercept", c.propensity_intercept);
  c.propensity_weights = f.get_list("propensity_weights", c.propensity_weights);
  c.exogenous_dropout = f.get_double("exogenous_dropout", c.exogenous_dropout);
  c.alpha = f.get_double("alpha", c.alpha);
  c.beta = f.get_double("beta", c.beta);
  c.alpha_grid = f.get_list("alpha_grid", c.alpha_grid);
  c.beta_grid = f.get_list("beta_grid", c.beta_grid);
  c.focus_depth_days = static_cast<int>(f.get_int("focus_depth_days", c.focus_depth_days));
  c.focus_view_days = static_cast<int>(f.get_int("focus_view_days", c.focus_view_days));
  c.focus_depth_boost = f.get_double("focus_depth_boost", c.focus_depth_boost);
  c.focus_view_boost = f.get_double("focus_view_boost", c.focus_view_boost);
  c.truth_mc = f.get_uint("truth_mc", c.truth_mc);
  c.validate();
  return c;
}

GridSplit grid_split_from(const ConfigFile& f, const SimConfig& c) {
  const std::size_t cells = c.alpha_grid.size() * c.beta_grid.size();
  const auto share = f.get_list("grid_cell_share", {1.0 / static_cast<double>(cells)});
  GridSplit s;
  if (share.size() == 1) {
    s.cell_share.assign(cells, share[0]);
  } else {
    s.cell_share = share;
  }
  return s;
}

}  // namespace surrogate
