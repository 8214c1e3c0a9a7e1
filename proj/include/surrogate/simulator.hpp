#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "surrogate/features.hpp"
#include "surrogate/interleaving.hpp"
#include "surrogate/metric_table.hpp"
#include "surrogate/types.hpp"

namespace surrogate {

// Synthetic marketplace. Users browse a consideration set of listings through
// ranked searches; every click is a listing page-view whose engagement is
// drawn from rates shifted by the user's arm, the listing's latent relevance
// and the view's depth in the pair. A pair's booking intent is
// Bernoulli(sigmoid(intercept + w . phi(S_final))) with phi the learner's own
// feature encoding, and an intent survives exogenous dropout with probability
// 1 - dropout. Arms only move engagement, so the outcome depends on the arm
// only through S.
//
// Ranking score of listing j in a search:
//   relevance_j - alpha * price_penalty_j - beta * distance_penalty_j + noise
// where both penalties are standard-normal listing traits unrelated to
// relevance, so raising alpha or beta degrades the ranking.
struct SimConfig {
  std::size_t n_users = 10000;
  std::size_t n_listings = 2000;
  std::size_t n_locations = 20;
  int horizon_days = 10;
  TimestampMs start_ms = 1'672'531'200'000;  // 2023-01-01T00:00:00Z
  TimestampMs lookback_ms = 14 * kMsPerDay;
  std::uint64_t seed = 1;
  std::string id_prefix;  // prepended to user, search and event ids

  // journeys
  double searches_per_user = 3.0;  // 1 + Poisson(searches_per_user - 1)
  std::size_t consideration_set = 20;
  std::size_t results_per_search = 10;
  double click_base = 0.3;
  double position_decay = 0.35;  // position bias 1 / (1 + decay * rank)
  double relevance_click = 0.8;
  double search_noise = 0.5;
  double dated_share = 0.7;

  // engagement: Poisson means for photos, reviews, amenities, calendar;
  // probabilities for host contact and reserve click; mean dwell seconds.
  std::array<double, 6> base_engagement_rates = {4.0, 0.6, 0.5, 0.3, 0.03, 0.02};
  double base_dwell_seconds = 45.0;
  double relevance_engagement = 0.5;
  // Multiplier on the deep signals (everything but photos) by view index
  // within the pair; the last entry repeats.
  std::vector<double> depth_profile = {0.3, 0.7, 1.6, 1.1, 0.9, 0.8};

  // experiment
  double treatment_effect = 1.0;  // engagement-rate multiplier of the treatment arm
  double treatment_share = 0.5;

  // ground truth: P(intent | S) = sigmoid(propensity_intercept + w . phi(S))
  double propensity_intercept = -5.5;
  std::vector<double> propensity_weights = default_propensity_weights();
  double exogenous_dropout = 0.3;

  // ranking
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<double> alpha_grid = {0.0};
  std::vector<double> beta_grid = {0.0};

  // share-trend scenario: a favourite listing drawn from the consideration
  // set gets deeper engagement
  // in the last focus_depth_days before the journey ends. In the last
  // focus_view_days it is pinned to the top, clicked with probability 0.95 and
  // viewed 1 + Poisson(focus_view_boost - 1) times per search.
  int focus_depth_days = 0;
  int focus_view_days = 0;
  double focus_depth_boost = 3.0;
  double focus_view_boost = 4.0;

  std::size_t truth_mc = 20000;  // users per arm for the ATE oracle in truth.json

  static std::vector<double> default_propensity_weights();
  void validate() const;
};

struct TrueEffect {
  double mean_control = 0.0;  // expected bookings per user
  double mean_treatment = 0.0;
  double ate = 0.0;
  double ate_se = 0.0;
  double lift = 0.0;  // mean_treatment / mean_control - 1
  double lift_se = 0.0;
  std::size_t n_mc = 0;
};

struct PairTruth {
  std::string user_id;
  std::string listing_id;
  double booking_probability = 0.0;  // (1 - dropout) * P(intent | S_final)
  bool intent = false;
  bool booked = false;
};

struct GroundTruth {
  double intercept = 0.0;
  std::vector<double> weights;
  double dropout = 0.0;
  std::vector<PairTruth> pairs;
  std::optional<TrueEffect> effect;

  double intent_probability(const FeatureVector& phi) const;
  double booking_probability(const FeatureVector& phi) const;  // after dropout
};

struct SimOutput {
  std::vector<InteractionEvent> events;  // user order, then time order
  std::vector<BookingOutcome> outcomes;
  std::vector<ListingAttributes> listings;
  Assignment assignment;  // user -> arm, or search -> grid cell
  std::vector<std::string> users;
  GroundTruth truth;
  std::size_t pair_count = 0;
  std::size_t search_count = 0;
};

enum class Randomization { user, search_grid };

struct GridSplit {
  // Per-cell traffic share over alpha_grid x beta_grid (row-major in alpha);
  // searches outside every cell get the default alpha/beta and arm "holdout".
  std::vector<double> cell_share;
};

// Scenario presets layered on a base config (seed, size and start are kept).
// Cohort: deep engagement concentrates on a pair's third view.
SimConfig cohort_scenario(SimConfig base);
// Concentration: 28-day journeys, clicks spread over a wide result page, and a
// favourite listing that deepens 6 days and is revisited 3 days before the end.
// Bookings outside the favourite are rare.
SimConfig concentration_scenario(SimConfig base);

// User-level A/B run: each user lands in "treatment" with treatment_share.
SimOutput simulate(const SimConfig& config);

// Search-level randomisation over the alpha x beta grid. Cell ids are
// "a<i>b<j>".
SimOutput run_grid(const SimConfig& config, const GridSplit& split);

std::string grid_cell_id(std::size_t alpha_index, std::size_t beta_index);

// Expected bookings per user in each arm from the generative process, with
// common random numbers across arms. Throws invalid_argument if n_mc < 10^4.
TrueEffect true_ate(const SimConfig& config, std::size_t n_mc, double treatment_multiplier,
                    double control_multiplier = 1.0);

std::string truth_json(const SimConfig& config, const SimOutput& out);

struct RankerSpec {
  double alpha = 0.0;
  double beta = 0.0;
  double relevance_weight = 1.0;
};

struct InterleavingRun {
  std::vector<QuerySession> sessions;
  std::vector<InteractionEvent> events;
  std::vector<BookingOutcome> outcomes;
  std::vector<ListingAttributes> listings;
  std::vector<std::vector<std::string>> lists_a;
  std::vector<std::vector<std::string>> lists_b;
};

struct InterleavingSimOptions {
  std::size_t queries = 1000;
  double passes_mean = 1.5;          // scans of the result list: 1 + Poisson(mean - 1)
  double outside_view_rate = 0.1;    // chance a clicked listing is revisited off-list
};

// One query per synthetic user: both rankers order the user's consideration
// set, the lists are team-draft interleaved and the user browses the
// interleaving.
InterleavingRun simulate_interleaving(const SimConfig& config, const RankerSpec& ranker_a, const RankerSpec& ranker_b,
                                      const InterleavingSimOptions& options);

// Expected bookings per query when users see ranker's list alone.
double ranker_expected_bookings(const SimConfig& config, const RankerSpec& ranker, std::size_t n_mc);

}  // namespace surrogate
