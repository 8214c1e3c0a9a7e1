#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "surrogate/attribution.hpp"
#include "surrogate/metric_table.hpp"

namespace surrogate {

inline constexpr double kSignificance = 0.05;
inline constexpr double kZ95 = 1.959963984540054;

struct LiftEstimate {
  std::string metric;
  double mean_t = 0.0;
  double mean_c = 0.0;
  double lift = 0.0;  // mean_t / mean_c - 1
  double variance = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double p_value = 1.0;
  std::size_t n_t = 0;
  std::size_t n_c = 0;
};

// Percent lift with delta-method variance on independent group means:
//   var = (m_T/m_C)^2 * (s_T^2 / (n_T m_T^2) + s_C^2 / (n_C m_C^2))
// using sample variances. Two-sided normal p-value for lift = 0.
// Throws invalid_argument if a group has fewer than 2 units, and data when the
// control mean is 0.
LiftEstimate percent_lift(std::span<const double> treatment, std::span<const double> control,
                          std::string metric = "");

double normal_two_sided_p(double z);

struct MetricColumn {
  std::string name;
  std::vector<std::pair<std::string, double>> values;  // (unit_id, value)
};

struct VarianceRatioRow {
  std::string metric;
  double variance_ratio = 1.0;
  LiftEstimate lift;
};

// Splits every column by arm and divides each metric's lift variance by the
// baseline's. Throws invalid_argument listing the missing units when columns
// disagree on the unit roster or a unit has no arm.
std::vector<VarianceRatioRow> variance_ratio_table(std::span<const MetricColumn> columns,
                                                   const std::string& baseline, const Assignment& assignment,
                                                   const std::string& treatment_arm = "treatment",
                                                   const std::string& control_arm = "control");

std::vector<MetricColumn> columns_of(const MetricTable& table);

// Lift of one table column between two arms.
LiftEstimate lift_of(const MetricTable& table, const std::string& column, const Assignment& assignment,
                     const std::string& treatment_arm = "treatment", const std::string& control_arm = "control");

struct ExperimentReadout {
  std::string name;
  double outcome_lift = 0.0;
  double outcome_p = 1.0;
  double surrogate_lift = 0.0;
  std::size_t n = 0;
};

struct AlignmentRow {
  ExperimentReadout readout;
  bool significant = false;
};

struct AlignmentReport {
  std::size_t n_total = 0;
  std::size_t n_significant = 0;
  std::optional<double> sign_agreement_rate;  // empty when nothing is significant
  std::optional<double> pearson_correlation;  // empty when undefined
  std::vector<AlignmentRow> rows;
};

// Restricts to experiments whose outcome p-value is below 0.05 and compares
// the two lift columns there. Throws invalid_argument for an empty input.
AlignmentReport alignment_analysis(std::span<const ExperimentReadout> experiments);

std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Linear-interpolation percentile between order statistics, percentile in [0,100].
double percentile(std::vector<double> values, double pct);

struct CohortCurve {
  std::size_t views = 0;  // cohort: pairs with exactly this many views before booking
  std::size_t pairs = 0;
  std::vector<double> values;  // percentile of utility at view index 1..views
};

struct CohortCurves {
  std::vector<CohortCurve> curves;
  std::vector<std::size_t> omitted;  // requested cohorts without pairs
};

// Records must be grouped by pair in step order, restricted to booked pairs'
// pre-booking views (see booked_pair_records).
CohortCurves utility_by_view_index(std::span<const UtilityRecord> records, std::span<const std::size_t> cohorts,
                                   double pct);

std::vector<UtilityRecord> booked_pair_records(const JourneyStore& store, std::span<const UtilityRecord> records);

struct ShareDay {
  int offset = 0;  // days relative to the booking day (0 = booking day)
  std::optional<double> view_share;
  std::optional<double> utility_share;
  std::size_t view_users = 0;
  std::size_t utility_users = 0;
};

// For each booker (first positive outcome) and each day offset in
// [-horizon, 0], the booked listing's share of that day's page-views and of
// that day's positive-part utility, averaged over bookers with a nonzero
// denominator. Views after the booking time are ignored.
std::vector<ShareDay> utility_share_trend(std::span<const UtilityRecord> records,
                                          std::span<const BookingOutcome> outcomes, int horizon_days);

struct ShareUptick {
  double view_base = 0.0;
  double utility_base = 0.0;
  std::optional<int> view_day;  // first offset whose share exceeds factor x base
  std::optional<int> utility_day;
};

// Base level is the mean share over the earliest base_days offsets; the
// uptick is searched after them.
ShareUptick share_uptick(std::span<const ShareDay> days, std::size_t base_days, double factor = 2.0);

struct TrendTest {
  double slope = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double p_value = 1.0;
  bool excludes_zero() const { return ci_lo > 0 || ci_hi < 0; }
};

// Weighted least-squares slope of per-cell estimates on a dose variable,
// weights 1/variance. Needs at least 2 distinct x values.
TrendTest linear_trend(std::span<const double> x, std::span<const double> estimate,
                       std::span<const double> variance);

}  // namespace surrogate

namespace surrogate {

// Grid cells are labelled "a<i>b<j>" with i indexing alpha and j beta.
std::optional<std::pair<std::size_t, std::size_t>> parse_grid_cell(const std::string& arm);

struct GridPoint {
  double alpha = 0.0;
  double mean = 0.0;
  double variance = 0.0;  // of the mean
  std::size_t n = 0;
};

struct GridTrend {
  std::string metric;
  std::vector<GridPoint> points;
  TrendTest trend;
};

// Pools the cells of each alpha over beta (beta is randomised independently)
// and tests the linear trend of the per-alpha means. Units whose arm is not a
// grid cell are ignored.
GridTrend grid_alpha_trend(const MetricTable& table, const std::string& metric, const Assignment& assignment,
                           std::span<const double> alpha_grid);

}  // namespace surrogate
