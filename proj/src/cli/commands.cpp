#include "surrogate/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "surrogate/attribution.hpp"
#include "surrogate/config.hpp"
#include "surrogate/error.hpp"
#include "surrogate/experiment_stats.hpp"
#include "surrogate/hash.hpp"
#include "surrogate/interleaving.hpp"
#include "surrogate/io.hpp"
#include "surrogate/journey_store.hpp"
#include "surrogate/learner.hpp"
#include "surrogate/simulator.hpp"
#include "surrogate/svg.hpp"

namespace fs = std::filesystem;

namespace surrogate::cli {

namespace {

const std::set<std::string>& all_config_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k = simulator_keys();
    for (const char* extra : {"randomization", "learner", "label_scope", "holdout_fraction", "num_trees", "max_depth",
                              "learning_rate", "dropout_rate", "min_samples_leaf", "l2_leaf", "subsample",
                              "logistic_l2", "caps", "queries", "passes_mean", "outside_view_rate", "ranker_a",
                              "ranker_b", "include_outside_views", "pre_users", "experiments", "experiment_users",
                              "cohorts", "cohort_percentile", "share_horizon_days", "analysis_users"}) {
      k.insert(extra);
    }
    return k;
  }();
  return keys;
}

ConfigFile load_config(const GlobalOptions& g) {
  ConfigFile cf = g.config.empty() ? ConfigFile{} : ConfigFile::load(g.config);
  cf.require_known(all_config_keys());
  return cf;
}

std::uint64_t resolve_seed(const GlobalOptions& g, const ConfigFile& cf) {
  return g.seed ? *g.seed : cf.get_uint("seed", 1);
}

class OutputDir {
 public:
  OutputDir(const std::string& dir, RunManifest& manifest) : dir_(dir), manifest_(manifest) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(ErrorKind::config, "cannot create output directory " + dir_ + ": " + ec.message());
  }

  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) fail(ErrorKind::config, "cannot write " + path(name));
    out << content;
    out.close();
    manifest_.outputs[name] = sha256_hex(content);
  }

  // Records a file some other writer produced inside the directory.
  void record(const std::string& name) const { manifest_.outputs[name] = sha256_file(path(name)); }

  void finish() const { write_raw(manifest_.subcommand + ".manifest.json", manifest_.to_json()); }

 private:
  void write_raw(const std::string& name, const std::string& content) const {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) fail(ErrorKind::config, "cannot write " + path(name));
    out << content;
  }

  std::string dir_;
  RunManifest& manifest_;
};

RunManifest start_manifest(const std::string& sub, const GlobalOptions& g, std::uint64_t seed) {
  RunManifest m;
  m.subcommand = sub;
  m.config_path = g.config;
  m.seed = seed;
  return m;
}

void add_input(RunManifest& m, const std::string& path) {
  if (!path.empty()) m.inputs[path] = sha256_file(path);
}

template <class Fn>
std::string render(Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

std::string fmt(double v) { return format_double(v); }

JourneyStore load_store(const std::string& events, const std::string& outcomes, const std::string& listings) {
  auto store = JourneyStore::load(events, outcomes, listings);
  const auto& r = store.report();
  if (!r.errors.empty()) {
    std::cerr << "warning: " << r.errors.size() << " malformed input lines skipped; first: line "
              << r.errors.front().line << ": " << r.errors.front().message << "\n";
  }
  return store;
}

Assignment load_assignment(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::not_found, "cannot open assignment " + path);
  return read_assignment(in);
}

// Refuses an input whose hash disagrees with a manifest in its directory.
void verify_against_manifests(const std::string& path, bool force) {
  if (path.empty()) return;
  const fs::path p(path);
  const auto dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  const auto name = p.filename().string();
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const auto fname = entry.path().filename().string();
    if (fname.size() < 14 || fname.substr(fname.size() - 14) != ".manifest.json") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto m = RunManifest::from_json(ss.str());
    const auto it = m.outputs.find(name);
    if (it == m.outputs.end()) continue;
    const auto actual = sha256_file(path);
    if (actual != it->second) {
      const std::string msg = path + " does not match " + entry.path().string();
      if (!force) fail(ErrorKind::validation, msg + " (use --force to override)");
      std::cerr << "warning: " << msg << "\n";
    }
  }
}

// ---- simulate ------------------------------------------------------------

void write_simulation(const SimConfig& c, const SimOutput& out, const OutputDir& dir) {
  dir.write("events.jsonl", render([&](std::ostream& s) {
              for (const auto& e : out.events) write_event_jsonl(s, e);
            }));
  dir.write("outcomes.jsonl", render([&](std::ostream& s) {
              for (const auto& o : out.outcomes) write_outcome_jsonl(s, o);
            }));
  dir.write("listings.csv", render([&](std::ostream& s) { write_listings_csv(s, out.listings); }));
  dir.write("assignment.csv", render([&](std::ostream& s) { write_assignment(s, out.assignment); }));
  dir.write("truth.json", truth_json(c, out));
}

// ---- train ---------------------------------------------------------------

struct TrainSettings {
  std::string learner = "gbdt";
  LabelScope scope = LabelScope::pair_final;
  double holdout = 0.2;
  GbdtConfig gbdt;
  LogisticConfig logistic;
};

LabelScope parse_scope(const std::string& s) {
  if (s == "per_step") return LabelScope::per_step;
  if (s == "pair_final") return LabelScope::pair_final;
  fail(ErrorKind::config, "label scope must be per_step or pair_final, got '" + s + "'");
}

std::string scope_name(LabelScope s) { return s == LabelScope::per_step ? "per_step" : "pair_final"; }

TrainSettings train_settings(const ConfigFile& cf, const TrainOptions& o, std::uint64_t seed) {
  TrainSettings t;
  t.learner = o.learner.value_or(cf.get_string("learner", t.learner));
  if (t.learner != "gbdt" && t.learner != "logistic") fail(ErrorKind::config, "learner must be gbdt or logistic");
  t.scope = parse_scope(o.label_scope.value_or(cf.get_string("label_scope", scope_name(t.scope))));
  t.holdout = o.holdout.value_or(cf.get_double("holdout_fraction", t.holdout));
  if (!(t.holdout >= 0.0 && t.holdout < 1.0)) fail(ErrorKind::config, "holdout fraction must be in [0, 1)");
  auto& g = t.gbdt;
  g.num_trees = o.trees.value_or(static_cast<int>(cf.get_int("num_trees", g.num_trees)));
  g.max_depth = o.depth.value_or(static_cast<int>(cf.get_int("max_depth", g.max_depth)));
  g.learning_rate = o.learning_rate.value_or(cf.get_double("learning_rate", g.learning_rate));
  g.dropout_rate = o.dropout.value_or(cf.get_double("dropout_rate", g.dropout_rate));
  g.min_samples_leaf = static_cast<int>(cf.get_int("min_samples_leaf", g.min_samples_leaf));
  g.l2_leaf = cf.get_double("l2_leaf", g.l2_leaf);
  g.subsample = cf.get_double("subsample", g.subsample);
  g.seed = seed;
  t.logistic.l2 = o.l2.value_or(cf.get_double("logistic_l2", t.logistic.l2));
  try {
    g.validate();
    t.logistic.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  return t;
}

std::string model_report_csv(const ModelReport& r, double constant_log_loss, std::size_t train_examples) {
  std::string s = "metric,value\n";
  s += "train_examples," + std::to_string(train_examples) + "\n";
  s += "holdout_examples," + std::to_string(r.examples) + "\n";
  s += "log_loss," + fmt(r.log_loss) + "\n";
  s += "constant_log_loss," + fmt(constant_log_loss) + "\n";
  s += "auc," + fmt(r.auc) + "\n";
  s += "calibration_slope," + fmt(r.calibration_slope) + "\n";
  s += "calibration_intercept," + fmt(r.calibration_intercept) + "\n";
  return s;
}

std::string calibration_csv(const ModelReport& r) {
  std::string s = "bin,mean_prediction,empirical_rate,count\n";
  for (std::size_t i = 0; i < r.calibration.size(); ++i) {
    const auto& b = r.calibration[i];
    s += std::to_string(i) + "," + fmt(b.mean_prediction) + "," + fmt(b.empirical_rate) + "," +
         std::to_string(b.count) + "\n";
  }
  return s;
}

// ---- evaluate ------------------------------------------------------------

std::string lift_csv(const std::vector<VarianceRatioRow>& rows) {
  std::string s = "metric,mean_t,mean_c,lift,variance,ci_lo,ci_hi,p_value,n_t,n_c\n";
  for (const auto& r : rows) {
    const auto& l = r.lift;
    s += l.metric + "," + fmt(l.mean_t) + "," + fmt(l.mean_c) + "," + fmt(l.lift) + "," + fmt(l.variance) + "," +
         fmt(l.ci_lo) + "," + fmt(l.ci_hi) + "," + fmt(l.p_value) + "," + std::to_string(l.n_t) + "," +
         std::to_string(l.n_c) + "\n";
  }
  return s;
}

std::string ratio_csv(const std::vector<VarianceRatioRow>& rows) {
  std::string s = "metric,variance_ratio\n";
  for (const auto& r : rows) s += r.metric + "," + fmt(r.variance_ratio) + "\n";
  return s;
}

std::string lift_svg(const std::vector<VarianceRatioRow>& rows) {
  PlotSpec spec;
  spec.title = "Percent lift with 95% CI";
  spec.x_label = "metric index";
  spec.y_label = "lift";
  spec.zero_lines = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    PlotSeries s;
    s.label = rows[i].metric;
    s.points = true;
    const double x = static_cast<double>(i);
    s.x = {x - 0.15, x, x + 0.15};
    s.y = {rows[i].lift.lift, rows[i].lift.lift, rows[i].lift.lift};
    s.lo = {rows[i].lift.ci_lo, rows[i].lift.ci_lo, rows[i].lift.ci_lo};
    s.hi = {rows[i].lift.ci_hi, rows[i].lift.ci_hi, rows[i].lift.ci_hi};
    spec.series.push_back(std::move(s));
  }
  return render_svg(spec);
}

std::vector<ExperimentReadout> read_readouts(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::not_found, "cannot open readouts " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("name,outcome_lift,outcome_p,surrogate_lift", 0) != 0) {
    fail(ErrorKind::data, path + ": expected header name,outcome_lift,outcome_p,surrogate_lift");
  }
  std::vector<ExperimentReadout> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() < 4) fail(ErrorKind::data, path + ":" + std::to_string(n) + ": expected 4 fields");
    try {
      out.push_back(ExperimentReadout{f[0], std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), 0});
    } catch (const std::exception&) {
      fail(ErrorKind::data, path + ":" + std::to_string(n) + ": bad number");
    }
  }
  return out;
}

std::string readouts_csv(const std::vector<ExperimentReadout>& rs) {
  std::string s = "name,outcome_lift,outcome_p,surrogate_lift\n";
  for (const auto& r : rs) {
    s += r.name + "," + fmt(r.outcome_lift) + "," + fmt(r.outcome_p) + "," + fmt(r.surrogate_lift) + "\n";
  }
  return s;
}

void write_alignment(const AlignmentReport& a, const OutputDir& dir) {
  std::string s = "name,outcome_lift,outcome_p,surrogate_lift,significant\n";
  for (const auto& r : a.rows) {
    s += r.readout.name + "," + fmt(r.readout.outcome_lift) + "," + fmt(r.readout.outcome_p) + "," +
         fmt(r.readout.surrogate_lift) + "," + (r.significant ? "1" : "0") + "\n";
  }
  dir.write("alignment.csv", s);
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("nan"); };
  dir.write("alignment_summary.csv", "n_total,n_significant,sign_agreement_rate,pearson_correlation\n" +
                                         std::to_string(a.n_total) + "," + std::to_string(a.n_significant) + "," +
                                         opt(a.sign_agreement_rate) + "," + opt(a.pearson_correlation) + "\n");
  PlotSpec spec;
  spec.title = "Booking lift vs utility lift (significant experiments)";
  spec.x_label = "utility lift";
  spec.y_label = "booking lift";
  spec.diagonal = true;
  PlotSeries sig, other;
  sig.label = "significant";
  other.label = "not significant";
  sig.points = other.points = true;
  for (const auto& r : a.rows) {
    auto& s2 = r.significant ? sig : other;
    s2.x.push_back(r.readout.surrogate_lift);
    s2.y.push_back(r.readout.outcome_lift);
  }
  spec.series = {sig, other};
  dir.write("alignment.svg", render_svg(spec));
}

void write_grid(const std::vector<GridTrend>& trends, const OutputDir& dir) {
  std::string pts = "metric,alpha,mean,variance,n\n";
  std::string tests = "metric,slope,se,ci_lo,ci_hi,p_value,excludes_zero\n";
  PlotSpec spec;
  spec.title = "Search metric relative to the first alpha";
  spec.x_label = "alpha";
  spec.y_label = "mean / mean at first alpha";
  for (const auto& t : trends) {
    PlotSeries s;
    s.label = t.metric;
    const double base = t.points.front().mean;
    for (const auto& p : t.points) {
      pts += t.metric + "," + fmt(p.alpha) + "," + fmt(p.mean) + "," + fmt(p.variance) + "," + std::to_string(p.n) + "\n";
      const double half = kZ95 * std::sqrt(p.variance);
      s.x.push_back(p.alpha);
      s.y.push_back(p.mean / base);
      s.lo.push_back((p.mean - half) / base);
      s.hi.push_back((p.mean + half) / base);
    }
    const auto& tr = t.trend;
    tests += t.metric + "," + fmt(tr.slope) + "," + fmt(tr.se) + "," + fmt(tr.ci_lo) + "," + fmt(tr.ci_hi) + "," +
             fmt(tr.p_value) + "," + (tr.excludes_zero() ? "1" : "0") + "\n";
    spec.series.push_back(std::move(s));
  }
  dir.write("grid_trend.csv", pts);
  dir.write("grid_trend_test.csv", tests);
  dir.write("grid_alpha.svg", render_svg(spec));
}

// ---- interleave ----------------------------------------------------------

RankerSpec parse_ranker(const ConfigFile& cf, const std::string& key) {
  const auto v = cf.get_list(key, {0.0, 0.0, 1.0});
  if (v.size() != 3) fail(ErrorKind::config, key + " needs alpha,beta,relevance_weight");
  return RankerSpec{v[0], v[1], v[2]};
}

std::string winner_csv(const std::vector<PreferenceReport>& reports) {
  std::string s = "policy,queries,wins_a,wins_b,ties,win_rate_a,sign_test_p,mean_difference,ci_lo,ci_hi\n";
  for (const auto& r : reports) {
    s += to_string(r.policy) + "," + std::to_string(r.queries) + "," + std::to_string(r.wins_a) + "," +
         std::to_string(r.wins_b) + "," + std::to_string(r.ties) + "," +
         (r.win_rate_a ? fmt(*r.win_rate_a) : std::string("nan")) + "," + fmt(r.sign_test_p) + "," +
         fmt(r.mean_difference) + "," + fmt(r.ci_lo) + "," + fmt(r.ci_hi) + "\n";
  }
  return s;
}

// ---- report-all helpers --------------------------------------------------

// Logistic value model fitted on the scenario's pre-period (same process,
// shifted back by its horizon plus the lookback, on an independent seed).
SurrogateModel scenario_model(const SimConfig& scenario) {
  SimConfig pre = scenario;
  pre.seed = scenario.seed + 7919;
  pre.start_ms -= static_cast<TimestampMs>(scenario.horizon_days) * kMsPerDay + scenario.lookback_ms;
  pre.id_prefix = scenario.id_prefix + "p";
  pre.treatment_share = 0.0;
  const auto out = simulate(pre);
  TrainingOptions to;
  to.scope = LabelScope::pair_final;
  return train_logistic(build_training_set(JourneyStore::ingest(out.events, out.outcomes, out.listings), to), {});
}

std::string uptick_csv(const ShareUptick& u) {
  auto day = [](const std::optional<int>& d) { return d ? std::to_string(*d) : std::string(); };
  return "measure,base_share,uptick_day\nview," + format_double(u.view_base) + "," + day(u.view_day) + "\nutility," +
         format_double(u.utility_base) + "," + day(u.utility_day) + "\n";
}

std::string cohort_csv(const CohortCurves& c) {
  std::string s = "views,pairs,view_index,utility\n";
  for (const auto& curve : c.curves) {
    for (std::size_t i = 0; i < curve.values.size(); ++i) {
      s += std::to_string(curve.views) + "," + std::to_string(curve.pairs) + "," + std::to_string(i + 1) + "," +
           fmt(curve.values[i]) + "\n";
    }
  }
  return s;
}

std::string cohort_svg(const CohortCurves& c, double pct) {
  PlotSpec spec;
  spec.title = "Utility by page-view index, percentile " + fmt(pct);
  spec.x_label = "page-view index";
  spec.y_label = "utility";
  for (const auto& curve : c.curves) {
    PlotSeries s;
    s.label = std::to_string(curve.views) + " views";
    for (std::size_t i = 0; i < curve.values.size(); ++i) {
      s.x.push_back(static_cast<double>(i + 1));
      s.y.push_back(curve.values[i]);
    }
    spec.series.push_back(std::move(s));
  }
  return render_svg(spec);
}

std::string share_csv(const std::vector<ShareDay>& days) {
  std::string s = "offset,view_share,utility_share,view_users,utility_users\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("nan"); };
  for (const auto& d : days) {
    s += std::to_string(d.offset) + "," + opt(d.view_share) + "," + opt(d.utility_share) + "," +
         std::to_string(d.view_users) + "," + std::to_string(d.utility_users) + "\n";
  }
  return s;
}

std::string share_svg(const std::vector<ShareDay>& days) {
  PlotSpec spec;
  spec.title = "Booked listing share by day before booking";
  spec.x_label = "days relative to booking";
  spec.y_label = "share";
  PlotSeries v, u;
  v.label = "page-view share";
  u.label = "utility share";
  for (const auto& d : days) {
    v.x.push_back(d.offset);
    v.y.push_back(d.view_share.value_or(std::nan("")));
    u.x.push_back(d.offset);
    u.y.push_back(d.utility_share.value_or(std::nan("")));
  }
  spec.series = {v, u};
  return render_svg(spec);
}

GlobalOptions stage(const GlobalOptions& g, const std::string& config, const std::string& sub) {
  GlobalOptions s = g;
  s.config = config;
  s.out = (fs::path(g.out) / sub).string();
  return s;
}

void expect_ok(int code, const std::string& what) {
  if (code != kExitOk) fail(ErrorKind::validation, what + " exited with code " + std::to_string(code));
}

}  // namespace

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["subcommand"] = subcommand;
  j["config_path"] = config_path;
  j["seed"] = seed;
  j["tool_version"] = tool_version;
  j["parameters"] = parameters;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  return j.dump(1) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.subcommand = j.at("subcommand").get<std::string>();
    m.config_path = j.at("config_path").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.parameters = j.at("parameters").get<std::map<std::string, std::string>>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("bad manifest: ") + e.what());
  }
  return m;
}

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::config: return kExitConfig;
      case ErrorKind::validation: return kExitValidation;
      default: return kExitData;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

int cmd_simulate(const GlobalOptions& g) {
  const auto cf = load_config(g);
  SimConfig c = sim_config_from(cf);
  if (g.seed) c.seed = *g.seed;
  const auto mode = cf.get_string("randomization", "user");
  if (mode != "user" && mode != "search_grid") fail(ErrorKind::config, "randomization must be user or search_grid");

  auto manifest = start_manifest("simulate", g, c.seed);
  manifest.parameters["randomization"] = mode;
  add_input(manifest, g.config);
  const OutputDir dir(g.out, manifest);

  SimOutput out = mode == "user" ? simulate(c) : run_grid(c, grid_split_from(cf, c));
  if (mode == "user" && c.truth_mc >= 10'000) out.truth.effect = true_ate(c, c.truth_mc, c.treatment_effect);
  write_simulation(c, out, dir);
  dir.finish();
  std::cout << "simulated " << out.users.size() << " users, " << out.events.size() << " page-views, "
            << out.pair_count << " pairs, " << out.outcomes.size() << " bookings -> " << g.out << "\n";
  return kExitOk;
}

int cmd_train(const GlobalOptions& g, const TrainOptions& o) {
  const auto cf = load_config(g);
  const auto seed = resolve_seed(g, cf);
  const auto settings = train_settings(cf, o, seed);
  auto manifest = start_manifest("train", g, seed);
  manifest.parameters = {{"learner", settings.learner},
                         {"label_scope", scope_name(settings.scope)},
                         {"holdout_fraction", fmt(settings.holdout)}};
  add_input(manifest, g.config);
  for (const auto* p : {&o.events, &o.outcomes, &o.listings}) add_input(manifest, *p);
  const OutputDir dir(g.out, manifest);

  const auto store = load_store(o.events, o.outcomes, o.listings);
  TrainingOptions to;
  to.scope = settings.scope;
  const auto data = build_training_set(store, to);
  if (data.size() == 0) fail(ErrorKind::data, "no training examples");
  auto [train, holdout] = settings.holdout > 0.0 ? split_holdout(data, settings.holdout, seed)
                                                  : std::pair<LabeledSet, LabeledSet>{data, data};
  if (holdout.size() == 0) holdout = train;
  const auto model =
      settings.learner == "gbdt" ? train_gbdt(train, settings.gbdt) : train_logistic(train, settings.logistic);

  const auto report = evaluate(model, holdout);
  const double base_rate = static_cast<double>(model.meta.positives) / static_cast<double>(train.size());
  const std::vector<double> constant(holdout.size(), base_rate);
  const double constant_loss = mean_log_loss(constant, holdout.labels);

  if (o.model_out.empty()) {
    dir.write("model.json", model.to_json());
  } else {
    model.save(o.model_out);
    manifest.outputs[o.model_out] = sha256_file(o.model_out);
  }
  dir.write("model_report.csv", model_report_csv(report, constant_loss, train.size()));
  dir.write("calibration.csv", calibration_csv(report));
  dir.finish();
  std::cout << settings.learner << " model on " << train.size() << " examples: holdout log loss "
            << fmt(report.log_loss) << " (constant " << fmt(constant_loss) << "), AUC " << fmt(report.auc) << "\n";
  return kExitOk;
}

int cmd_attribute(const GlobalOptions& g, const AttributeOptions& o) {
  const auto cf = load_config(g);
  const auto seed = resolve_seed(g, cf);
  const auto unit = parse_unit_kind(o.unit);
  auto caps = o.caps.empty() ? cf.get_list("caps", {1.0}) : o.caps;
  for (double c : caps) {
    if (!(c > 0.0)) fail(ErrorKind::config, "caps must be positive");
  }

  auto manifest = start_manifest("attribute", g, seed);
  manifest.parameters["unit"] = o.unit;
  std::string cap_text;
  for (double c : caps) cap_text += (cap_text.empty() ? "" : ",") + fmt(c);
  manifest.parameters["caps"] = cap_text;
  manifest.parameters["allow_overlap"] = o.allow_overlap ? "true" : "false";
  add_input(manifest, g.config);
  for (const auto* p : {&o.events, &o.outcomes, &o.listings, &o.model, &o.assignment}) add_input(manifest, *p);
  const OutputDir dir(g.out, manifest);

  const auto store = load_store(o.events, o.outcomes, o.listings);
  const auto model = SurrogateModel::load(o.model);
  if (!o.allow_overlap) check_scoring_window(model, store);
  const auto records = attribute_all(model, store);
  const double err = max_telescoping_error(records);

  MetricOptions mo;
  mo.caps = caps;
  mo.allow_overlap = true;  // checked above
  if (!o.assignment.empty()) {
    for (const auto& [id, arm] : load_assignment(o.assignment)) mo.roster.push_back(id);
  }
  const std::string suffix = to_string(unit);
  dir.write("utilities.csv", render([&](std::ostream& s) { write_utility_csv(s, records); }));
  dir.write("aggregated_" + suffix + ".csv",
            render([&](std::ostream& s) { write_aggregated_csv(s, unit, caps, records); }));
  dir.write("metrics_" + suffix + ".csv",
            render([&](std::ostream& s) { write_metric_table(s, unit_metrics(store, records, unit, mo)); }));
  manifest.parameters["max_telescoping_error"] = fmt(err);
  dir.finish();
  std::cout << "attributed " << records.size() << " page-views over " << store.pair_count()
            << " pairs; max telescoping error " << fmt(err) << "\n";
  if (o.audit_telescoping && err > 1e-9) {
    std::cerr << "telescoping audit failed: " << fmt(err) << " > 1e-9\n";
    return kExitValidation;
  }
  return kExitOk;
}

int cmd_evaluate(const GlobalOptions& g, const EvaluateOptions& o) {
  const auto cf = load_config(g);
  const auto seed = resolve_seed(g, cf);
  for (const auto* p : {&o.metrics, &o.assignment, &o.readouts}) verify_against_manifests(*p, g.force);

  auto manifest = start_manifest("evaluate", g, seed);
  manifest.parameters = {{"baseline", o.baseline}, {"treatment_arm", o.treatment_arm}, {"control_arm", o.control_arm}};
  add_input(manifest, g.config);
  for (const auto* p : {&o.metrics, &o.assignment, &o.readouts, &o.grid_config}) add_input(manifest, *p);
  const OutputDir dir(g.out, manifest);

  std::ifstream min(o.metrics);
  if (!min) fail(ErrorKind::not_found, "cannot open metrics " + o.metrics);
  const auto table = read_metric_table(min);
  auto assignment = load_assignment(o.assignment);

  std::string treat = o.treatment_arm, control = o.control_arm;
  if (!o.grid_config.empty()) {
    const auto grid = sim_config_from(ConfigFile::load(o.grid_config));
    auto metrics = o.grid_metrics.empty() ? std::vector<std::string>{"utility", "booked_clicks"} : o.grid_metrics;
    std::vector<GridTrend> trends;
    for (const auto& m : metrics) trends.push_back(grid_alpha_trend(table, m, assignment, grid.alpha_grid));
    write_grid(trends, dir);
    // Lift of the highest alpha against the lowest, pooled over beta.
    Assignment pooled;
    const auto last = grid.alpha_grid.size() - 1;
    for (const auto& [unit, arm] : assignment) {
      const auto cell = parse_grid_cell(arm);
      if (cell && cell->first == last && last > 0) pooled[unit] = "treatment";
      if (cell && cell->first == 0) pooled[unit] = "control";
    }
    assignment = std::move(pooled);
    treat = "treatment";
    control = "control";
  }

  // Units outside the two compared arms do not enter the readout.
  MetricTable scoped = table;
  {
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const auto it = assignment.find(table.unit_ids[r]);
      if (it != assignment.end() && (it->second == treat || it->second == control)) keep.push_back(r);
    }
    scoped.unit_ids.clear();
    for (auto& col : scoped.values) col.clear();
    for (auto r : keep) {
      scoped.unit_ids.push_back(table.unit_ids[r]);
      for (std::size_t c = 0; c < table.columns.size(); ++c) scoped.values[c].push_back(table.values[c][r]);
    }
  }
  if (!scoped.has_column(o.baseline)) fail(ErrorKind::config, "baseline column '" + o.baseline + "' not in metrics");
  const auto rows = variance_ratio_table(columns_of(scoped), o.baseline, assignment, treat, control);
  dir.write("lift.csv", lift_csv(rows));
  dir.write("variance_ratio.csv", ratio_csv(rows));
  dir.write("lift.svg", lift_svg(rows));

  if (!o.readouts.empty()) write_alignment(alignment_analysis(read_readouts(o.readouts)), dir);
  dir.finish();
  for (const auto& r : rows) {
    std::cout << r.metric << ": lift " << fmt(r.lift.lift) << " [" << fmt(r.lift.ci_lo) << ", " << fmt(r.lift.ci_hi)
              << "], variance ratio " << fmt(r.variance_ratio) << "\n";
  }
  return kExitOk;
}

int cmd_interleave(const GlobalOptions& g, const InterleaveOptions& o) {
  const auto cf = load_config(g);
  SimConfig c = sim_config_from(cf);
  if (g.seed) c.seed = *g.seed;
  InterleavingSimOptions so;
  so.queries = cf.get_uint("queries", so.queries);
  so.passes_mean = cf.get_double("passes_mean", so.passes_mean);
  so.outside_view_rate = cf.get_double("outside_view_rate", so.outside_view_rate);
  const auto ra = parse_ranker(cf, "ranker_a"), rb = parse_ranker(cf, "ranker_b");
  CreditOptions credit;
  credit.include_outside_views = o.include_outside_views || cf.get_bool("include_outside_views", false);

  std::vector<CreditPolicy> policies;
  if (o.policies.empty()) {
    policies = {CreditPolicy::utility_delta, CreditPolicy::booked_all_clicks, CreditPolicy::booked_first_click};
  } else {
    for (const auto& p : o.policies) {
      try {
        policies.push_back(parse_credit_policy(p));
      } catch (const Error& e) {
        fail(ErrorKind::config, e.what());
      }
    }
  }
  const bool needs_model =
      std::find(policies.begin(), policies.end(), CreditPolicy::utility_delta) != policies.end();
  if (needs_model && o.model.empty()) fail(ErrorKind::config, "the utility_delta policy needs --model");

  auto manifest = start_manifest("interleave", g, c.seed);
  manifest.parameters = {{"queries", std::to_string(so.queries)},
                         {"include_outside_views", credit.include_outside_views ? "true" : "false"}};
  add_input(manifest, g.config);
  add_input(manifest, o.model);
  const OutputDir dir(g.out, manifest);

  const auto run = simulate_interleaving(c, ra, rb, so);
  std::size_t violations = 0;
  std::string audit = "query_id,violation\n";
  std::string lists = "query_id,position,listing_id,team\n";
  for (std::size_t i = 0; i < run.sessions.size(); ++i) {
    const auto& s = run.sessions[i];
    if (const auto v = check_team_draft(run.lists_a[i], run.lists_b[i], c.results_per_search, s.list)) {
      ++violations;
      audit += s.query_id + "," + *v + "\n";
    }
    for (std::size_t k = 0; k < s.list.items.size(); ++k) {
      lists += s.query_id + "," + std::to_string(k + 1) + "," + s.list.items[k].listing_id + "," +
               (s.list.items[k].team == Team::A ? "A" : "B") + "\n";
    }
  }

  std::string sessions;
  for (const auto& s : run.sessions) {
    nlohmann::ordered_json j;
    j["query_id"] = s.query_id;
    j["seed"] = s.list.draft_seed;
    auto& items = j["items"] = nlohmann::ordered_json::array();
    auto& teams = j["teams"] = nlohmann::ordered_json::array();
    for (const auto& it : s.list.items) {
      items.push_back(it.listing_id);
      teams.push_back(it.team == Team::A ? "A" : "B");
    }
    auto& first = j["first_pick"] = nlohmann::ordered_json::array();
    for (auto t : s.list.first_pick) first.push_back(t == Team::A ? "A" : "B");
    auto& events = j["events"] = nlohmann::ordered_json::array();
    for (const auto& v : s.views) {
      events.push_back({{"event_id", v.event_id}, {"listing_id", v.listing_id}, {"ts_ms", v.timestamp_ms},
                        {"from_list", v.from_list}});
    }
    j["booked_listing"] = s.booked_listing ? nlohmann::ordered_json(*s.booked_listing) : nlohmann::ordered_json();
    sessions += j.dump() + "\n";
  }

  std::map<std::string, double> utilities;
  if (needs_model) {
    const auto store = JourneyStore::ingest(run.events, run.outcomes, run.listings);
    const auto model = SurrogateModel::load(o.model);
    if (!o.allow_overlap) check_scoring_window(model, store);
    for (const auto& r : attribute_all(model, store)) utilities[r.event_id] = r.utility;
  }

  std::string ledger = "query_id,policy,credit_a,credit_b,ignored_views\n";
  std::vector<PreferenceReport> reports;
  for (const auto policy : policies) {
    std::vector<CreditEntry> entries;
    for (const auto& s : run.sessions) {
      entries.push_back(assign_credit(s, policy, needs_model ? &utilities : nullptr, credit));
      const auto& e = entries.back();
      ledger += e.query_id + "," + to_string(policy) + "," + fmt(e.credit_a) + "," + fmt(e.credit_b) + "," +
                std::to_string(e.ignored_views) + "\n";
    }
    reports.push_back(winner_stats(entries));
  }
  dir.write("interleavings.csv", lists);
  dir.write("sessions.jsonl", sessions);
  dir.write("interleave_ledger.csv", ledger);
  dir.write("winner_report.csv", winner_csv(reports));
  dir.write("legality_audit.csv", audit);
  dir.finish();
  for (const auto& r : reports) {
    std::cout << to_string(r.policy) << ": A wins " << r.wins_a << ", B wins " << r.wins_b << ", ties " << r.ties
              << ", sign test p " << fmt(r.sign_test_p) << "\n";
  }
  std::cout << "legality audit: " << violations << " violations over " << run.sessions.size() << " interleavings\n";
  return violations == 0 ? kExitOk : kExitValidation;
}

int cmd_report_all(const GlobalOptions& g) {
  const auto cf = load_config(g);
  const auto seed = resolve_seed(g, cf);
  SimConfig base = sim_config_from(cf);
  base.seed = seed;

  auto manifest = start_manifest("report-all", g, seed);
  add_input(manifest, g.config);
  const OutputDir root(g.out, manifest);

  // Stage configs are written out so every stage can be rerun by hand.
  auto write_stage_config = [&](const std::string& name, ConfigFile stage_cf) {
    root.write(name, stage_cf.to_text());
    return root.path(name);
  };
  ConfigFile exp_cf = cf;
  exp_cf.set("seed", std::to_string(seed));

  // Training period: an earlier, disjoint time range.
  ConfigFile pre_cf = exp_cf;
  const auto pre_start = date_of(base.start_ms - (base.horizon_days + base.lookback_ms / kMsPerDay + 1) * kMsPerDay);
  pre_cf.set("start_date", format_date(pre_start));
  pre_cf.set("seed", std::to_string(seed + 1));
  pre_cf.set("id_prefix", "pre");
  pre_cf.set("n_users", std::to_string(cf.get_uint("pre_users", 4 * base.n_users)));
  pre_cf.set("truth_mc", "0");
  const auto pre_path = write_stage_config("pre.conf", pre_cf);
  const auto exp_path = write_stage_config("experiment.conf", exp_cf);

  auto pre = stage(g, pre_path, "pre");
  pre.seed.reset();
  expect_ok(cmd_simulate(pre), "simulate (training period)");
  auto exp = stage(g, exp_path, "experiment");
  exp.seed.reset();
  expect_ok(cmd_simulate(exp), "simulate (experiment)");

  auto model_stage = stage(g, exp_path, "model");
  TrainOptions to;
  to.events = (fs::path(pre.out) / "events.jsonl").string();
  to.outcomes = (fs::path(pre.out) / "outcomes.jsonl").string();
  to.listings = (fs::path(pre.out) / "listings.csv").string();
  expect_ok(cmd_train(model_stage, to), "train");
  const auto model_path = (fs::path(model_stage.out) / "model.json").string();

  AttributeOptions ao;
  ao.events = (fs::path(exp.out) / "events.jsonl").string();
  ao.outcomes = (fs::path(exp.out) / "outcomes.jsonl").string();
  ao.listings = (fs::path(exp.out) / "listings.csv").string();
  ao.model = model_path;
  ao.assignment = (fs::path(exp.out) / "assignment.csv").string();
  ao.caps = cf.get_list("caps", {1.0, 0.1});
  ao.audit_telescoping = true;
  auto attr_stage = stage(g, exp_path, "attribute");
  expect_ok(cmd_attribute(attr_stage, ao), "attribute");

  EvaluateOptions eo;
  eo.metrics = (fs::path(attr_stage.out) / "metrics_user.csv").string();
  eo.assignment = ao.assignment;

  // Alignment: a batch of smaller in-memory experiments with varied effects.
  const auto n_exp = cf.get_uint("experiments", 20);
  if (n_exp > 0) {
    const auto model = SurrogateModel::load(model_path);
    std::vector<ExperimentReadout> readouts;
    for (std::uint64_t k = 0; k < n_exp; ++k) {
      SimConfig ec = base;
      ec.seed = seed + 1000 + k;
      ec.n_users = cf.get_uint("experiment_users", 5000);
      ec.id_prefix = "x" + std::to_string(k);
      ec.treatment_effect = 0.85 + 0.4 * static_cast<double>(k) / static_cast<double>(std::max<std::uint64_t>(1, n_exp - 1));
      const auto out = simulate(ec);
      const auto store = JourneyStore::ingest(out.events, out.outcomes, out.listings);
      MetricOptions mo;
      mo.roster = out.users;
      mo.allow_overlap = true;
      const auto table = unit_metrics(store, attribute_all(model, store), UnitKind::user, mo);
      const auto yb = lift_of(table, "bookings", out.assignment);
      const auto yu = lift_of(table, "utility", out.assignment);
      readouts.push_back(ExperimentReadout{"exp" + std::to_string(k), yb.lift, yb.p_value, yu.lift, table.rows()});
    }
    root.write("readouts.csv", readouts_csv(readouts));
    eo.readouts = root.path("readouts.csv");
  }
  expect_ok(cmd_evaluate(stage(g, exp_path, "evaluate"), eo), "evaluate");

  // Search-level grid.
  ConfigFile grid_cf = exp_cf;
  grid_cf.set("randomization", "search_grid");
  if (!cf.has("alpha_grid")) grid_cf.set("alpha_grid", "0,0.25,0.5,0.75,1");
  if (!cf.has("beta_grid")) grid_cf.set("beta_grid", "0,0.25,0.5,0.75,1");
  grid_cf.set("id_prefix", "g");
  const auto grid_path = write_stage_config("grid.conf", grid_cf);
  auto grid_sim = stage(g, grid_path, "grid");
  grid_sim.seed.reset();
  expect_ok(cmd_simulate(grid_sim), "simulate (grid)");
  AttributeOptions gao = ao;
  gao.events = (fs::path(grid_sim.out) / "events.jsonl").string();
  gao.outcomes = (fs::path(grid_sim.out) / "outcomes.jsonl").string();
  gao.listings = (fs::path(grid_sim.out) / "listings.csv").string();
  gao.assignment = (fs::path(grid_sim.out) / "assignment.csv").string();
  gao.unit = "search";
  auto grid_attr = stage(g, grid_path, "grid_attribute");
  expect_ok(cmd_attribute(grid_attr, gao), "attribute (grid)");
  EvaluateOptions geo;
  geo.metrics = (fs::path(grid_attr.out) / "metrics_search.csv").string();
  geo.assignment = gao.assignment;
  geo.baseline = "booked_clicks";
  geo.grid_config = grid_path;
  expect_ok(cmd_evaluate(stage(g, grid_path, "grid_evaluate"), geo), "evaluate (grid)");

  // Interleaving.
  ConfigFile il_cf = exp_cf;
  il_cf.set("id_prefix", "i");
  if (!cf.has("ranker_b")) il_cf.set("ranker_b", "1,0,1");
  if (!cf.has("queries")) il_cf.set("queries", "2000");
  const auto il_path = write_stage_config("interleave.conf", il_cf);
  InterleaveOptions io;
  io.model = model_path;
  auto il = stage(g, il_path, "interleave");
  il.seed.reset();
  const int il_code = cmd_interleave(il, io);

  // Behavioural analyses run on their own scenarios, each scored by a model
  // trained on that scenario's pre-period.
  const auto analysis = (fs::path(g.out) / "analysis").string();
  RunManifest am = start_manifest("analysis", g, seed);
  const OutputDir adir(analysis, am);
  const auto users = static_cast<std::size_t>(cf.get_int("analysis_users", 30000));
  {
    SimConfig sc = cohort_scenario(base);
    sc.n_users = users;
    sc.id_prefix = "h";
    const auto model = scenario_model(sc);
    const auto out = simulate(sc);
    const auto store = JourneyStore::ingest(out.events, out.outcomes, out.listings);
    const auto booked = booked_pair_records(store, attribute_all(model, store));
    std::vector<std::size_t> cohorts;
    for (double v : cf.get_list("cohorts", {3, 5, 7})) cohorts.push_back(static_cast<std::size_t>(v));
    const double pct = cf.get_double("cohort_percentile", 75.0);
    const auto curves = utility_by_view_index(booked, cohorts, pct);
    adir.write("cohort_curves.csv", cohort_csv(curves));
    adir.write("cohort_curves.svg", cohort_svg(curves, pct));
  }
  {
    SimConfig sc = concentration_scenario(base);
    sc.n_users = users;
    sc.id_prefix = "c";
    const auto model = scenario_model(sc);
    const auto out = simulate(sc);
    const auto store = JourneyStore::ingest(out.events, out.outcomes, out.listings);
    const auto days = utility_share_trend(attribute_all(model, store), out.outcomes,
                                          static_cast<int>(cf.get_int("share_horizon_days", 14)));
    adir.write("share_trend.csv", share_csv(days));
    adir.write("share_trend.svg", share_svg(days));
    adir.write("share_uptick.csv", uptick_csv(share_uptick(days, 5)));
  }
  adir.finish();
  root.finish();
  std::cout << "report written to " << g.out << "\n";
  return il_code;
}

}  // namespace surrogate::cli
