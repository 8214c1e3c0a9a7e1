#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "surrogate/attribution.hpp"
#include "surrogate/error.hpp"
#include "surrogate/interleaving.hpp"
#include "surrogate/learner.hpp"
#include "surrogate/simulator.hpp"

using namespace surrogate;

namespace {

using Ids = std::vector<std::string>;

oracle::Draft as_draft(const InterleavedList& l) {
  oracle::Draft d;
  for (const auto& it : l.items) d.emplace_back(it.listing_id, it.team == Team::A ? 0 : 1);
  return d;
}

Ids random_list(std::mt19937_64& rng, std::size_t pool, std::size_t len) {
  Ids all;
  for (std::size_t i = 0; i < pool; ++i) all.push_back("l" + std::to_string(i));
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(len, pool));
  return all;
}

QuerySession session_of(const Ids& a, const Ids& b, std::uint64_t seed) {
  QuerySession s;
  s.query_id = "q";
  s.list = team_draft(a, b, 10, seed);
  return s;
}

SessionView sv(const std::string& id, const std::string& listing, TimestampMs ts, bool from_list = true) {
  return SessionView{id, listing, ts, from_list};
}

Team team_of(const QuerySession& s, const std::string& listing) { return *s.list.team_of(listing); }

SurrogateModel pre_period_model(SimConfig c) {
  c.seed += 7919;
  c.start_ms -= static_cast<TimestampMs>(c.horizon_days) * kMsPerDay + c.lookback_ms;
  c.id_prefix += "p";
  c.treatment_share = 0.0;
  const auto out = simulate(c);
  TrainingOptions o;
  o.scope = LabelScope::pair_final;
  return train_logistic(build_training_set(JourneyStore::ingest(out.events, out.outcomes, out.listings), o), {});
}

std::map<std::string, double> utilities_of(const InterleavingRun& run, const SurrogateModel& model) {
  const auto store = JourneyStore::ingest(run.events, run.outcomes, run.listings);
  std::map<std::string, double> u;
  for (const auto& r : attribute_all(model, store)) u[r.event_id] = r.utility;
  return u;
}

}  // namespace

TEST_CASE("identical lists reproduce the shared order") {
  const Ids a = {"x", "y", "z", "w", "v"};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto l = team_draft(a, a, 5, seed);
    REQUIRE(l.items.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(l.items[i].listing_id == a[i]);
    // Each round's two picks go to both teams, first-picker first.
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(l.items[2 * r].team == l.first_pick[r]);
      CHECK(l.items[2 * r + 1].team != l.first_pick[r]);
    }
  }
}

TEST_CASE("two disjoint pairs yield exactly the enumerated outcomes") {
  const Ids a = {"1", "2"}, b = {"3", "4"};
  const auto expected = oracle::enumerate_drafts(a, b, 4);
  CHECK(expected.size() == 4);
  std::set<oracle::Draft> seen;
  for (std::uint64_t seed = 0; seed < 400; ++seed) seen.insert(as_draft(team_draft(a, b, 4, seed)));
  CHECK(seen == expected);
}

TEST_CASE("overlapping lists only produce enumerated outcomes") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_list(rng, 6, 1 + rng() % 5), b = random_list(rng, 6, 1 + rng() % 5);
    const std::size_t k = 1 + rng() % 6;
    const auto expected = oracle::enumerate_drafts(a, b, k);
    for (std::uint64_t seed = 0; seed < 16; ++seed) CHECK(expected.count(as_draft(team_draft(a, b, k, seed))) == 1);
  }
}

TEST_CASE("10k random list pairs all pass the legality checker") {
  std::mt19937_64 rng(2024);
  std::size_t violations = 0;
  for (int trial = 0; trial < 10'000; ++trial) {
    const std::size_t pool = 3 + rng() % 30;
    const auto a = random_list(rng, pool, 1 + rng() % 15), b = random_list(rng, pool, 1 + rng() % 15);
    const std::size_t k = 1 + rng() % 20;
    const auto l = team_draft(a, b, k, rng());
    if (check_team_draft(a, b, k, l)) ++violations;

    std::set<std::string> ids;
    for (const auto& it : l.items) ids.insert(it.listing_id);
    std::set<std::string> uni(a.begin(), a.end());
    uni.insert(b.begin(), b.end());
    CHECK(ids.size() == l.items.size());
    CHECK(l.items.size() == std::min(k, uni.size()));
  }
  CHECK(violations == 0);
}

TEST_CASE("the checker flags tampered interleavings") {
  const Ids a = {"1", "2", "3"}, b = {"4", "5", "6"};
  auto l = team_draft(a, b, 6, 9);
  REQUIRE_FALSE(check_team_draft(a, b, 6, l));
  auto swapped = l;
  std::swap(swapped.items[0], swapped.items[1]);
  CHECK(check_team_draft(a, b, 6, swapped));
  auto relabelled = l;
  relabelled.items[2].team = relabelled.items[2].team == Team::A ? Team::B : Team::A;
  CHECK(check_team_draft(a, b, 6, relabelled));
  auto dup = l;
  dup.items[5] = dup.items[0];
  CHECK(check_team_draft(a, b, 6, dup));
}

TEST_CASE("drafting is deterministic for a seed") {
  const Ids a = {"1", "2", "3", "4"}, b = {"4", "3", "9", "8"};
  CHECK(as_draft(team_draft(a, b, 4, 77)) == as_draft(team_draft(a, b, 4, 77)));
  CHECK_THROWS_AS(team_draft(Ids{}, Ids{}, 4, 1), Error);
}

TEST_CASE("three clicks on a booked listing drafted by A") {
  auto s = session_of({"1", "2"}, {"3", "4"}, 5);
  s.views = {sv("e1", "1", 1), sv("e2", "3", 2), sv("e3", "1", 3), sv("e4", "1", 4)};
  s.booked_listing = "1";
  const bool a_owns = team_of(s, "1") == Team::A;
  REQUIRE(a_owns);
  const auto all = assign_credit(s, CreditPolicy::booked_all_clicks);
  const auto first = assign_credit(s, CreditPolicy::booked_first_click);
  CHECK(all.credit_a == 3.0);
  CHECK(all.credit_b == 0.0);
  CHECK(first.credit_a == 1.0);
  CHECK(first.credit_b == 0.0);
}

TEST_CASE("without a booking only the utility policy gives credit") {
  auto s = session_of({"1", "2"}, {"3", "4"}, 5);
  s.views = {sv("e1", "1", 1), sv("e2", "3", 2), sv("e3", "9", 3)};
  const std::map<std::string, double> u = {{"e1", 0.04}, {"e2", 0.01}, {"e3", 0.5}};
  const auto all = assign_credit(s, CreditPolicy::booked_all_clicks);
  CHECK(all.credit_a + all.credit_b == 0.0);
  const auto first = assign_credit(s, CreditPolicy::booked_first_click);
  CHECK(first.credit_a + first.credit_b == 0.0);
  const auto util = assign_credit(s, CreditPolicy::utility_delta, &u);
  CHECK(util.credit_a + util.credit_b == doctest::Approx(0.05));
  CHECK(util.ignored_views == 1);
  CHECK_THROWS_AS(assign_credit(s, CreditPolicy::utility_delta), Error);
}

TEST_CASE("off-list views are credited only when asked") {
  auto s = session_of({"1"}, {"3"}, 5);
  s.views = {sv("e1", "1", 1), sv("e2", "1", 2, false)};
  const std::map<std::string, double> u = {{"e1", 0.02}, {"e2", 0.03}};
  CHECK(assign_credit(s, CreditPolicy::utility_delta, &u).credit_a +
            assign_credit(s, CreditPolicy::utility_delta, &u).credit_b ==
        doctest::Approx(0.02));
  CreditOptions o;
  o.include_outside_views = true;
  const auto e = assign_credit(s, CreditPolicy::utility_delta, &u, o);
  CHECK(e.credit_a + e.credit_b == doctest::Approx(0.05));
}

TEST_CASE("credit conservation and policy nesting on random sessions") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> util(-0.05, 0.2);
  for (int q = 0; q < 500; ++q) {
    const auto a = random_list(rng, 12, 6), b = random_list(rng, 12, 6);
    auto s = session_of(a, b, rng());
    std::map<std::string, double> u;
    double drafted = 0;
    const int n = static_cast<int>(rng() % 8);
    for (int v = 0; v < n; ++v) {
      const std::string listing = "l" + std::to_string(rng() % 12);
      const std::string id = "e" + std::to_string(v);
      s.views.push_back(sv(id, listing, v));
      u[id] = util(rng);
      if (s.list.team_of(listing)) drafted += u[id];
    }
    if (!s.views.empty() && rng() % 2) s.booked_listing = s.views[rng() % s.views.size()].listing_id;
    const auto e = assign_credit(s, CreditPolicy::utility_delta, &u);
    CHECK(e.credit_a + e.credit_b == doctest::Approx(drafted).epsilon(1e-12));
    const auto all = assign_credit(s, CreditPolicy::booked_all_clicks);
    const auto first = assign_credit(s, CreditPolicy::booked_first_click);
    CHECK(first.credit_a <= all.credit_a);
    CHECK(first.credit_b <= all.credit_b);
  }
}

TEST_CASE("all ties leave the win rate undefined") {
  std::vector<CreditEntry> ledger(12);
  const auto r = winner_stats(ledger);
  CHECK(r.ties == 12);
  CHECK_FALSE(r.win_rate_a.has_value());
}

TEST_CASE("A winning every one of 30 queries is highly significant") {
  std::vector<CreditEntry> ledger(30);
  for (auto& e : ledger) e.credit_a = 1.0;
  const auto r = winner_stats(ledger);
  CHECK(*r.win_rate_a == 1.0);
  CHECK(r.sign_test_p < 1e-6);
  CHECK(r.ci_lo > 0.0);
}

TEST_CASE("sign test matches exact binomial sums") {
  CHECK(sign_test_p_value(0, 0) == 1.0);
  CHECK(sign_test_p_value(3, 3) == doctest::Approx(1.0));
  CHECK(sign_test_p_value(5, 0) == doctest::Approx(2.0 / 32.0));
  CHECK(sign_test_p_value(8, 2) == doctest::Approx(2.0 * (1 + 10 + 45) / 1024.0));
}

TEST_CASE("identical rankers split wins evenly over 10k queries") {
  SimConfig c;
  c.n_users = 10'000;
  c.seed = 61;
  c.id_prefix = "i";
  const auto model = pre_period_model(c);
  InterleavingSimOptions o;
  o.queries = 10'000;
  const RankerSpec r{};
  const auto run = simulate_interleaving(c, r, r, o);
  const auto u = utilities_of(run, model);
  for (auto policy : {CreditPolicy::utility_delta, CreditPolicy::booked_all_clicks, CreditPolicy::booked_first_click}) {
    std::vector<CreditEntry> ledger;
    for (const auto& s : run.sessions) ledger.push_back(assign_credit(s, policy, &u));
    const auto rep = winner_stats(ledger);
    MESSAGE(to_string(policy) << " win rate " << rep.win_rate_a.value_or(-1) << " decided "
                              << rep.wins_a + rep.wins_b);
    REQUIRE(rep.win_rate_a.has_value());
    if (policy == CreditPolicy::utility_delta) {
      CHECK(*rep.win_rate_a >= 0.47);
      CHECK(*rep.win_rate_a <= 0.53);
    }
    CHECK(rep.sign_test_p > 0.001);
  }
}

TEST_CASE("utility credit prefers the ranker the booking oracle prefers") {
  SimConfig c;
  c.n_users = 10'000;
  c.seed = 62;
  c.id_prefix = "i";
  const auto model = pre_period_model(c);
  const RankerSpec good{}, bad{1.0, 0.0, 1.0};
  const double eg = ranker_expected_bookings(c, good, 20'000), eb = ranker_expected_bookings(c, bad, 20'000);
  MESSAGE("expected bookings per query " << eg << " vs " << eb);
  REQUIRE(eg > eb);
  InterleavingSimOptions o;
  o.queries = 5000;
  const auto run = simulate_interleaving(c, good, bad, o);
  const auto u = utilities_of(run, model);
  std::vector<CreditEntry> ledger;
  for (const auto& s : run.sessions) ledger.push_back(assign_credit(s, CreditPolicy::utility_delta, &u));
  const auto rep = winner_stats(ledger);
  MESSAGE("utility win rate " << rep.win_rate_a.value_or(-1) << " mean diff " << rep.mean_difference);
  CHECK(rep.mean_difference > 0.0);
  CHECK(rep.ci_lo > 0.0);
  CHECK(*rep.win_rate_a > 0.5);
}
