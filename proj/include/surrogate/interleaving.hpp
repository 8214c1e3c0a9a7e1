#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surrogate/types.hpp"

namespace surrogate {

enum class Team : std::uint8_t { A, B };

struct DraftedItem {
  std::string listing_id;
  Team team = Team::A;
};

struct InterleavedList {
  std::vector<DraftedItem> items;
  std::vector<Team> first_pick;  // per round: the team that drafted first
  std::uint64_t draft_seed = 0;

  std::optional<Team> team_of(const std::string& listing_id) const;
};

// Team-draft interleaving. Each round a seeded fair coin picks which team
// drafts first; each team then appends its highest-ranked item not yet
// placed. Items in both lists go to whichever team takes them first. A team
// whose list is used up sits out, so team counts stay within one of each
// other only while both lists still have undrafted items. Output length is
// min(k, |A union B|). Throws invalid_argument when both lists are empty.
InterleavedList team_draft(std::span<const std::string> list_a, std::span<const std::string> list_b, std::size_t k,
                           std::uint64_t seed);

// Checks an interleaving against the draft rules and its recorded coin flips
// without re-running the drafter. Returns a description of the first
// violation, or nothing if the list is legal.
std::optional<std::string> check_team_draft(std::span<const std::string> list_a, std::span<const std::string> list_b,
                                            std::size_t k, const InterleavedList& list);

enum class CreditPolicy { utility_delta, booked_all_clicks, booked_first_click };

std::string to_string(CreditPolicy policy);
CreditPolicy parse_credit_policy(const std::string& text);

struct SessionView {
  std::string event_id;
  std::string listing_id;
  TimestampMs timestamp_ms = 0;
  bool from_list = true;  // initiated from the interleaved result list
};

struct QuerySession {
  std::string query_id;
  InterleavedList list;
  std::vector<SessionView> views;  // time order
  std::optional<std::string> booked_listing;
};

struct CreditOptions {
  // Also credit views of drafted listings reached outside the result list.
  bool include_outside_views = false;
};

struct CreditEntry {
  std::string query_id;
  CreditPolicy policy = CreditPolicy::utility_delta;
  double credit_a = 0.0;
  double credit_b = 0.0;
  std::size_t ignored_views = 0;  // views of listings not in the interleaving
};

// utility_delta requires `utilities` (event_id -> utility) covering every
// credited view and throws invalid_argument otherwise.
CreditEntry assign_credit(const QuerySession& session, CreditPolicy policy,
                          const std::map<std::string, double>* utilities = nullptr, const CreditOptions& options = {});

struct PreferenceReport {
  CreditPolicy policy = CreditPolicy::utility_delta;
  std::size_t queries = 0;
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  std::size_t ties = 0;
  std::optional<double> win_rate_a;  // wins_a / (wins_a + wins_b); empty if all tie
  double sign_test_p = 1.0;
  double mean_difference = 0.0;  // mean of credit_a - credit_b
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

// Entries must all use the same policy.
PreferenceReport winner_stats(std::span<const CreditEntry> ledger);

// Exact two-sided binomial sign test with p = 1/2.
double sign_test_p_value(std::size_t wins, std::size_t losses);

}  // namespace surrogate
