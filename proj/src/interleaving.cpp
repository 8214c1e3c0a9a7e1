#include "surrogate/interleaving.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_set>

#include "surrogate/error.hpp"
#include "surrogate/experiment_stats.hpp"

namespace surrogate {

std::optional<Team> InterleavedList::team_of(const std::string& listing_id) const {
  for (const auto& it : items)
    if (it.listing_id == listing_id) return it.team;
  return std::nullopt;
}

InterleavedList team_draft(std::span<const std::string> list_a, std::span<const std::string> list_b, std::size_t k,
                           std::uint64_t seed) {
  if (list_a.empty() && list_b.empty()) fail(ErrorKind::invalid_argument, "both ranked lists are empty");
  std::unordered_set<std::string> all(list_a.begin(), list_a.end());
  all.insert(list_b.begin(), list_b.end());
  const std::size_t target = std::min(k, all.size());

  InterleavedList out;
  out.draft_seed = seed;
  std::mt19937_64 rng(seed);
  std::unordered_set<std::string> placed;
  std::size_t next_a = 0, next_b = 0;
  auto pick = [&](std::span<const std::string> list, std::size_t& cursor, Team team) {
    while (cursor < list.size() && placed.count(list[cursor])) ++cursor;
    if (cursor == list.size()) return;
    placed.insert(list[cursor]);
    out.items.push_back({list[cursor], team});
  };
  while (out.items.size() < target) {
    const Team first = (rng() >> 63) ? Team::B : Team::A;
    out.first_pick.push_back(first);
    for (Team team : {first, first == Team::A ? Team::B : Team::A}) {
      if (out.items.size() >= target) break;
      if (team == Team::A) pick(list_a, next_a, Team::A);
      else pick(list_b, next_b, Team::B);
    }
  }
  return out;
}

std::optional<std::string> check_team_draft(std::span<const std::string> list_a, std::span<const std::string> list_b,
                                            std::size_t k, const InterleavedList& list) {
  std::set<std::string> all(list_a.begin(), list_a.end());
  all.insert(list_b.begin(), list_b.end());
  const std::size_t expected = std::min(k, all.size());
  if (list.items.size() != expected)
    return "length " + std::to_string(list.items.size()) + " != min(k, |union|) = " + std::to_string(expected);

  std::set<std::string> seen;
  for (const auto& it : list.items)
    if (!seen.insert(it.listing_id).second) return "duplicate listing " + it.listing_id;

  // Replay position by position: the team of each item is fixed by the round's
  // coin and by which teams still had undrafted items.
  std::set<std::string> before;
  auto best_remaining = [&](std::span<const std::string> src) -> const std::string* {
    for (const auto& id : src)
      if (!before.count(id)) return &id;
    return nullptr;
  };
  std::size_t pos = 0, round = 0, count_a = 0, count_b = 0;
  while (pos < list.items.size()) {
    if (round >= list.first_pick.size()) return "more rounds than recorded coin flips";
    const Team first = list.first_pick[round];
    const Team order[2] = {first, first == Team::A ? Team::B : Team::A};
    for (Team team : order) {
      if (pos >= list.items.size()) break;
      const std::string* want = best_remaining(team == Team::A ? list_a : list_b);
      if (!want) continue;  // that team has nothing left this round
      const auto& item = list.items[pos];
      if (item.team != team)
        return "position " + std::to_string(pos) + " belongs to the other team under round " + std::to_string(round) +
               "'s coin flip";
      if (item.listing_id != *want)
        return "position " + std::to_string(pos) + " is " + item.listing_id + " but the team's best undrafted item is " +
               *want;
      before.insert(item.listing_id);
      (team == Team::A ? count_a : count_b) += 1;
      ++pos;
      const bool both_live = best_remaining(list_a) && best_remaining(list_b);
      if (both_live && (count_a > count_b + 1 || count_b > count_a + 1))
        return "team counts drifted apart while both lists had items";
    }
    ++round;
  }
  if (round != list.first_pick.size()) return "recorded coin flips exceed the rounds used";
  return std::nullopt;
}

std::string to_string(CreditPolicy policy) {
  switch (policy) {
    case CreditPolicy::utility_delta: return "utility_delta";
    case CreditPolicy::booked_all_clicks: return "booked_all_clicks";
    case CreditPolicy::booked_first_click: return "booked_first_click";
  }
  return "utility_delta";
}

CreditPolicy parse_credit_policy(const std::string& text) {
  if (text == "utility_delta") return CreditPolicy::utility_delta;
  if (text == "booked_all_clicks") return CreditPolicy::booked_all_clicks;
  if (text == "booked_first_click") return CreditPolicy::booked_first_click;
  fail(ErrorKind::invalid_argument, "unknown credit policy '" + text + "'");
}

CreditEntry assign_credit(const QuerySession& session, CreditPolicy policy,
                          const std::map<std::string, double>* utilities, const CreditOptions& options) {
  CreditEntry entry{session.query_id, policy, 0.0, 0.0, 0};
  if (policy == CreditPolicy::utility_delta && !utilities)
    fail(ErrorKind::invalid_argument, "utility credit needs page-view utilities");
  bool first_credited = false;
  for (const auto& v : session.views) {
    const auto team = session.list.team_of(v.listing_id);
    if (!team) {
      ++entry.ignored_views;
      continue;
    }
    double amount = 0.0;
    if (policy == CreditPolicy::utility_delta) {
      if (!v.from_list && !options.include_outside_views) continue;
      auto it = utilities->find(v.event_id);
      if (it == utilities->end())
        fail(ErrorKind::invalid_argument, "no utility for page-view " + v.event_id + " in query " + session.query_id);
      amount = it->second;
    } else {
      if (!v.from_list || !session.booked_listing || v.listing_id != *session.booked_listing) continue;
      if (policy == CreditPolicy::booked_first_click) {
        if (first_credited) continue;
        first_credited = true;
      }
      amount = 1.0;
    }
    (*team == Team::A ? entry.credit_a : entry.credit_b) += amount;
  }
  return entry;
}

double sign_test_p_value(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  const std::size_t k = std::min(wins, losses);
  // P(X <= k) for X ~ Bin(n, 1/2), summed in log space.
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
  double tail = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double log_term = lg_n1 - std::lgamma(static_cast<double>(i) + 1.0) -
                            std::lgamma(static_cast<double>(n - i) + 1.0) + log_half_n;
    tail += std::exp(log_term);
  }
  return std::min(1.0, 2.0 * tail);
}

PreferenceReport winner_stats(std::span<const CreditEntry> ledger) {
  if (ledger.empty()) fail(ErrorKind::invalid_argument, "winner statistics need at least one query");
  PreferenceReport r;
  r.policy = ledger.front().policy;
  r.queries = ledger.size();
  std::vector<double> diffs;
  diffs.reserve(ledger.size());
  for (const auto& e : ledger) {
    if (e.policy != r.policy) fail(ErrorKind::invalid_argument, "ledger mixes credit policies");
    if (e.credit_a > e.credit_b) ++r.wins_a;
    else if (e.credit_b > e.credit_a) ++r.wins_b;
    else ++r.ties;
    diffs.push_back(e.credit_a - e.credit_b);
  }
  if (r.wins_a + r.wins_b > 0)
    r.win_rate_a = static_cast<double>(r.wins_a) / static_cast<double>(r.wins_a + r.wins_b);
  r.sign_test_p = sign_test_p_value(r.wins_a, r.wins_b);
  const double n = static_cast<double>(diffs.size());
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= n;
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double se = diffs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  r.mean_difference = mean;
  r.ci_lo = mean - kZ95 * se;
  r.ci_hi = mean + kZ95 * se;
  return r;
}

}  // namespace surrogate
