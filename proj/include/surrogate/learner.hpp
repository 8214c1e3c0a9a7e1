#pragma once

#include <array>
#include <span>
#include <vector>

#include "surrogate/journey_store.hpp"
#include "surrogate/model.hpp"

namespace surrogate {

// Gradient-boosted regression trees on logistic loss. Splits are exact greedy
// over presorted feature values, scored with second-order gain
//   G_L^2/(H_L+l2) + G_R^2/(H_R+l2) - G^2/(H+l2)
// and leaves take the Newton value -G/(H+l2) times the learning rate.
//
// Dropout: each round drops every existing tree independently with
// probability dropout_rate and fits the new tree to the residual of the
// remaining ensemble. With k > 0 trees dropped and learning rate eta, the
// dropped trees are rescaled by k/(k+eta) and the new tree by 1/(k+eta)
// (on top of eta already in its leaves), which keeps the ensemble's expected
// output unchanged. With no trees dropped the round is plain boosting.
//
// Throws data for single-class input and invalid_argument for NaN features or
// ragged rows.
SurrogateModel train_gbdt(const LabeledSet& train, const GbdtConfig& config);

// L2-regularised maximum-likelihood logistic regression fitted by damped
// Newton steps on standardised features; the intercept is not penalised.
// Stops when the max-norm of the mean-loss gradient drops below 1e-8 or the
// iteration cap is reached. Throws data if the loss rises ten steps in a row.
SurrogateModel train_logistic(const LabeledSet& train, const LogisticConfig& config);

struct CalibrationBin {
  double mean_prediction = 0.0;
  double empirical_rate = 0.0;
  std::size_t count = 0;
};

struct ModelReport {
  std::size_t examples = 0;
  double log_loss = 0.0;
  double auc = 0.0;
  std::array<CalibrationBin, 10> calibration{};
  // Logistic recalibration y ~ a + b * logit(p); b near 1 means calibrated.
  double calibration_slope = 0.0;
  double calibration_intercept = 0.0;
};

std::vector<double> predict_all(const SurrogateModel& model, const LabeledSet& data);

// Metrics from precomputed probabilities; throws invalid_argument when empty.
ModelReport evaluate_predictions(std::span<const double> predictions, std::span<const int> labels);
ModelReport evaluate(const SurrogateModel& model, const LabeledSet& holdout);

double mean_log_loss(std::span<const double> predictions, std::span<const int> labels);
double rank_auc(std::span<const double> predictions, std::span<const int> labels);

std::string labeled_set_hash(const LabeledSet& data);

// Deterministic split of a labeled set into (train, holdout) by example index.
std::pair<LabeledSet, LabeledSet> split_holdout(const LabeledSet& data, double holdout_fraction, std::uint64_t seed);

}  // namespace surrogate
