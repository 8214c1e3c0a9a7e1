#include <iostream>

#include <CLI11.hpp>

#include "surrogate/cli.hpp"

namespace cli = surrogate::cli;

int main(int argc, char** argv) {
  CLI::App app{"Causal-surrogate utility metrics: simulate, train, attribute, evaluate, interleave"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", cli::kToolVersion);

  cli::GlobalOptions g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed (overrides the config's seed)");
  app.add_option("--config", g.config, "Key-value config file");
  app.add_option("--out", g.out, "Output directory (created if missing)");
  app.add_flag("--force", g.force, "Accept inputs whose hashes disagree with their manifests");

  auto* sim = app.add_subcommand("simulate", "Generate synthetic logs and the truth sidecar");

  cli::TrainOptions to;
  auto* train = app.add_subcommand("train", "Fit the value function V(S)");
  train->add_option("--events", to.events, "Event log JSONL")->required();
  train->add_option("--outcomes", to.outcomes, "Booking outcomes JSONL")->required();
  train->add_option("--listings", to.listings, "Listing attributes CSV");
  train->add_option("--model-out", to.model_out, "Model path (default <out>/model.json)");
  train->add_option("--learner", to.learner, "gbdt or logistic")->check(CLI::IsMember({"gbdt", "logistic"}));
  train->add_option("--label-scope", to.label_scope, "per_step or pair_final")
      ->check(CLI::IsMember({"per_step", "pair_final"}));
  train->add_option("--holdout", to.holdout, "Holdout fraction");
  train->add_option("--trees", to.trees, "Number of boosting rounds");
  train->add_option("--depth", to.depth, "Maximum tree depth");
  train->add_option("--learning-rate", to.learning_rate, "Boosting learning rate");
  train->add_option("--dropout", to.dropout, "Tree dropout rate");
  train->add_option("--l2", to.l2, "Logistic L2 penalty");

  cli::AttributeOptions ao;
  auto* attr = app.add_subcommand("attribute", "Per-view utilities and per-unit metrics");
  attr->add_option("--events", ao.events, "Event log JSONL")->required();
  attr->add_option("--outcomes", ao.outcomes, "Booking outcomes JSONL")->required();
  attr->add_option("--listings", ao.listings, "Listing attributes CSV");
  attr->add_option("--model", ao.model, "Model file")->required();
  attr->add_option("--assignment", ao.assignment, "Assignment CSV; its units join the roster");
  attr->add_option("--cap", ao.caps, "Cap threshold (repeatable)");
  attr->add_option("--unit", ao.unit, "user, search or listing")->check(CLI::IsMember({"user", "search", "listing"}));
  attr->add_flag("--audit-telescoping", ao.audit_telescoping, "Exit 4 if any pair fails to telescope within 1e-9");
  attr->add_flag("--allow-overlap", ao.allow_overlap, "Skip the training-window leakage guard");

  cli::EvaluateOptions eo;
  auto* eval = app.add_subcommand("evaluate", "Lift, variance ratios, alignment and plots");
  eval->add_option("--metrics", eo.metrics, "Metric table CSV")->required();
  eval->add_option("--assignment", eo.assignment, "Assignment CSV")->required();
  eval->add_option("--baseline", eo.baseline, "Baseline metric column");
  eval->add_option("--treatment-arm", eo.treatment_arm, "Treatment arm label");
  eval->add_option("--control-arm", eo.control_arm, "Control arm label");
  eval->add_option("--readouts", eo.readouts, "Experiment readouts CSV for the alignment analysis");
  eval->add_option("--grid-config", eo.grid_config, "Simulator config holding alpha_grid for the grid readout");
  eval->add_option("--grid-metric", eo.grid_metrics, "Metric for the grid trend (repeatable)");

  cli::InterleaveOptions io;
  auto* inter = app.add_subcommand("interleave", "Team-draft interleaving with credit policies");
  inter->add_option("--model", io.model, "Model file (needed by utility_delta)");
  inter->add_option("--policy", io.policies, "utility_delta, booked_all_clicks or booked_first_click (repeatable)");
  inter->add_flag("--include-outside-views", io.include_outside_views, "Credit views reached outside the list");
  inter->add_flag("--allow-overlap", io.allow_overlap, "Skip the training-window leakage guard");

  auto* report = app.add_subcommand("report-all", "Run the whole pipeline into one directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitConfig;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  return cli::run_guarded([&] {
    if (*sim) return cli::cmd_simulate(g);
    if (*train) return cli::cmd_train(g, to);
    if (*attr) return cli::cmd_attribute(g, ao);
    if (*eval) return cli::cmd_evaluate(g, eo);
    if (*inter) return cli::cmd_interleave(g, io);
    if (*report) return cli::cmd_report_all(g);
    return cli::kExitConfig;
  });
}
