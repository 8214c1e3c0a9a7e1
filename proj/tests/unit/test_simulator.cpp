#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "surrogate/error.hpp"
#include "surrogate/experiment_stats.hpp"
#include "surrogate/io.hpp"
#include "surrogate/simulator.hpp"

using namespace surrogate;

namespace {

std::string serialize(const SimOutput& out) {
  std::ostringstream s;
  for (const auto& e : out.events) write_event_jsonl(s, e);
  for (const auto& o : out.outcomes) write_outcome_jsonl(s, o);
  write_listings_csv(s, out.listings);
  write_assignment(s, out.assignment);
  return s.str();
}

SimConfig small(std::size_t users, std::uint64_t seed) {
  SimConfig c;
  c.n_users = users;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("same config and seed give byte-identical output") {
  const auto c = small(3000, 5);
  const auto a = simulate(c), b = simulate(c);
  CHECK(serialize(a) == serialize(b));
  CHECK(truth_json(c, a) == truth_json(c, b));
  auto d = c;
  d.seed = 6;
  CHECK(serialize(simulate(d)) != serialize(a));
}

TEST_CASE("adding users leaves earlier users' journeys untouched") {
  const auto a = simulate(small(200, 9)), b = simulate(small(400, 9));
  std::vector<InteractionEvent> first;
  for (const auto& e : b.events) {
    if (a.assignment.count(e.user_id)) first.push_back(e);
  }
  CHECK(first == a.events);
  CHECK(a.listings == b.listings);
  for (const auto& [u, arm] : a.assignment) CHECK(b.assignment.at(u) == arm);
}

TEST_CASE("events follow the store formats and ordering") {
  const auto out = simulate(small(500, 3));
  for (std::size_t i = 1; i < out.events.size(); ++i) {
    const auto& p = out.events[i - 1];
    const auto& e = out.events[i];
    if (p.user_id == e.user_id) CHECK(p.timestamp_ms <= e.timestamp_ms);
  }
  for (const auto& e : out.events) {
    CHECK(e.search_id.has_value());
    CHECK(e.arm.has_value());
    CHECK(e.engagement.host_contacted <= 1);
    CHECK(e.engagement.reserve_clicked <= 1);
    CHECK(e.engagement.dwell_seconds >= 0.0);
    std::ostringstream s;
    write_event_jsonl(s, e);
    CHECK(parse_event_line(s.str()) == e);
  }
  for (const auto& l : out.listings) {
    CHECK(l.price_per_night > 0);
    CHECK(l.review_score >= 0);
    CHECK(l.review_score <= 5);
  }
}

TEST_CASE("zero weights and intercept give intent probability one half") {
  auto c = small(3000, 11);
  c.propensity_weights.assign(kFeatureCount, 0.0);
  c.propensity_intercept = 0.0;
  const auto out = simulate(c);
  REQUIRE(out.truth.pairs.size() > 1000);
  double booked = 0;
  for (const auto& p : out.truth.pairs) {
    CHECK(p.booking_probability == doctest::Approx(0.5 * (1 - c.exogenous_dropout)));
    booked += p.booked ? 1 : 0;
  }
  const double n = static_cast<double>(out.truth.pairs.size());
  const double rate = booked / n;
  const double expect = 0.5 * (1 - c.exogenous_dropout);
  const double se = std::sqrt(expect * (1 - expect) / n);
  MESSAGE("empirical booking rate " << rate << " expected " << expect);
  CHECK(std::abs(rate - expect) < 4 * se);
}

TEST_CASE("null treatment has zero true effect") {
  auto c = small(100, 1);
  c.treatment_effect = 1.0;
  const auto t = true_ate(c, 20'000, 1.0);
  CHECK(t.ate == 0.0);
  CHECK(t.lift == 0.0);
  CHECK(t.mean_control > 0.0);
}

TEST_CASE("stronger engagement gives a positive true effect") {
  const auto t = true_ate(small(100, 2), 20'000, 1.2);
  MESSAGE("ate " << t.ate << " se " << t.ate_se);
  CHECK(t.ate > 4 * t.ate_se);
  CHECK(t.lift > 0.0);
}

TEST_CASE("true effect is reproducible and its error scales with sample size") {
  const auto c = small(100, 3);
  const auto a = true_ate(c, 20'000, 1.2), b = true_ate(c, 20'000, 1.2);
  CHECK(a.ate == b.ate);
  CHECK(a.ate_se == b.ate_se);
  const auto d = true_ate(c, 40'000, 1.2);
  const double ratio = a.ate_se / d.ate_se;
  MESSAGE("se ratio " << ratio);
  CHECK(ratio == doctest::Approx(std::sqrt(2.0)).epsilon(0.10));
  CHECK_THROWS_AS(true_ate(c, 9'999, 1.2), Error);
}

TEST_CASE("bad configs are rejected") {
  auto c = small(10, 1);
  c.exogenous_dropout = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small(10, 1);
  c.base_engagement_rates[0] = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small(10, 1);
  c.alpha_grid.clear();
  CHECK_THROWS_AS(c.validate(), Error);
  c = small(10, 1);
  c.propensity_weights.pop_back();
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("a one-cell grid puts every search in that cell") {
  const auto out = run_grid(small(500, 4), GridSplit{{1.0}});
  REQUIRE(out.search_count > 0);
  CHECK(out.assignment.size() == out.search_count);
  for (const auto& [s, cell] : out.assignment) CHECK(cell == grid_cell_id(0, 0));
}

TEST_CASE("25 cells at 1% each land within 0.2 pp over a million searches") {
  auto c = small(100'000, 8);
  c.searches_per_user = 10.5;
  c.alpha_grid = {0, 0.5, 1, 1.5, 2};
  c.beta_grid = {0, 0.5, 1, 1.5, 2};
  const auto out = run_grid(c, GridSplit{std::vector<double>(25, 0.01)});
  REQUIRE(out.search_count >= 1'000'000);
  std::map<std::string, double> count;
  for (const auto& [s, cell] : out.assignment) count[cell] += 1;
  CHECK(count.size() == 26);
  const double n = static_cast<double>(out.search_count);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(count[grid_cell_id(i, j)] / n - 0.01) <= 0.002);
  }
  CHECK(std::abs(count["holdout"] / n - 0.75) <= 0.002);
  CHECK(parse_grid_cell(grid_cell_id(3, 4)) == std::pair<std::size_t, std::size_t>{3, 4});
}

TEST_CASE("booking rates given the final state do not depend on the arm") {
  auto c = small(60'000, 17);
  c.treatment_effect = 1.5;
  const auto out = simulate(c);
  std::map<std::string, std::string> arm_of;
  for (const auto& [u, a] : out.assignment) arm_of[u] = a;
  // Bin pairs by their true booking probability; within a bin the state, not
  // the arm, decides the outcome.
  constexpr int kBins = 10;
  std::vector<double> edges;
  {
    std::vector<double> p;
    for (const auto& t : out.truth.pairs) p.push_back(t.booking_probability);
    for (int b = 1; b < kBins; ++b) edges.push_back(percentile(p, 100.0 * b / kBins));
  }
  std::array<std::array<double, 2>, kBins> booked{}, total{};
  for (const auto& t : out.truth.pairs) {
    const int bin = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), t.booking_probability) - edges.begin());
    const int arm = arm_of.at(t.user_id) == "treatment" ? 1 : 0;
    booked[bin][arm] += t.booked;
    total[bin][arm] += 1;
  }
  const double z_crit = 3.29;  // two-sided 0.01 / 10 bins
  for (int b = 0; b < kBins; ++b) {
    // Adjust for the within-bin spread of the probability via its arm means.
    double mean_p[2] = {0, 0};
    for (const auto& t : out.truth.pairs) {
      const int bin = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), t.booking_probability) - edges.begin());
      if (bin == b) mean_p[arm_of.at(t.user_id) == "treatment" ? 1 : 0] += t.booking_probability;
    }
    double var = 0, diff = 0;
    for (int a = 0; a < 2; ++a) {
      const double r = booked[b][a] / total[b][a];
      var += r * (1 - r) / total[b][a];
      diff += (a ? 1 : -1) * (r - mean_p[a] / total[b][a]);
    }
    CHECK(std::abs(diff) / std::sqrt(var) < z_crit);
  }
}

TEST_CASE("realized booking probabilities match the truth function") {
  const auto c = small(2000, 19);
  const auto out = simulate(c);
  double sum_p = 0, sum_y = 0;
  for (const auto& t : out.truth.pairs) {
    sum_p += t.booking_probability;
    sum_y += t.booked;
  }
  const double n = static_cast<double>(out.truth.pairs.size());
  CHECK(std::abs(sum_y - sum_p) < 4 * std::sqrt(sum_p));
  CHECK(out.outcomes.size() == static_cast<std::size_t>(sum_y));
  CHECK(n == static_cast<double>(out.pair_count));
}
