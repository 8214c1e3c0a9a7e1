#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace surrogate::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitValidation = 4;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = ".";
  bool force = false;
};

// Written next to a subcommand's outputs as <subcommand>.manifest.json.
struct RunManifest {
  std::string subcommand;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::map<std::string, std::string> parameters;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // file name in the out dir -> sha256

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

struct TrainOptions {
  std::string events;
  std::string outcomes;
  std::string listings;
  std::string model_out;  // default <out>/model.json
  std::optional<std::string> learner;      // gbdt | logistic
  std::optional<std::string> label_scope;  // per_step | pair_final
  std::optional<double> holdout;
  std::optional<int> trees;
  std::optional<int> depth;
  std::optional<double> learning_rate;
  std::optional<double> dropout;
  std::optional<double> l2;
};

struct AttributeOptions {
  std::string events;
  std::string outcomes;
  std::string listings;
  std::string model;
  std::string assignment;    // optional: its units form the roster
  std::vector<double> caps;  // default {1}
  std::string unit = "user";
  bool audit_telescoping = false;
  bool allow_overlap = false;
};

struct EvaluateOptions {
  std::string metrics;
  std::string assignment;
  std::string baseline = "bookings";
  std::string treatment_arm = "treatment";
  std::string control_arm = "control";
  std::string readouts;     // optional CSV: name,outcome_lift,outcome_p,surrogate_lift
  std::string grid_config;  // optional simulator config with alpha_grid
  std::vector<std::string> grid_metrics;
};

struct InterleaveOptions {
  std::string model;
  std::vector<std::string> policies;  // default: all three
  bool include_outside_views = false;
  bool allow_overlap = false;
};

// Each command writes into g.out (created if missing) and returns an exit
// code. Errors surface as surrogate::Error; run_guarded maps them to codes.
int cmd_simulate(const GlobalOptions& g);
int cmd_train(const GlobalOptions& g, const TrainOptions& o);
int cmd_attribute(const GlobalOptions& g, const AttributeOptions& o);
int cmd_evaluate(const GlobalOptions& g, const EvaluateOptions& o);
int cmd_interleave(const GlobalOptions& g, const InterleaveOptions& o);
int cmd_report_all(const GlobalOptions& g);

template <class F>
int run_guarded(F&& f);

int exit_code_for_current_exception();

template <class F>
int run_guarded(F&& f) {
  try {
    return f();
  } catch (...) {
    return exit_code_for_current_exception();
  }
}

}  // namespace surrogate::cli
