#pragma once

#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surrogate/journey_store.hpp"
#include "surrogate/metric_table.hpp"
#include "surrogate/model.hpp"

namespace surrogate {

// Listing-view utility: the change in V attributed to one page-view.
struct UtilityRecord {
  std::string event_id;
  std::string user_id;
  std::string listing_id;
  std::optional<std::string> search_id;
  std::size_t step = 0;  // 1-based position in the pair's timeline
  TimestampMs timestamp_ms = 0;
  double v_prev = 0.0;
  double v_curr = 0.0;
  double utility = 0.0;  // v_curr - v_prev
};

enum class UnitKind { user, search, listing };

std::string to_string(UnitKind kind);
UnitKind parse_unit_kind(const std::string& text);

struct AggregatedUtility {
  UnitKind unit_kind = UnitKind::user;
  std::string unit_id;
  double raw_sum = 0.0;
  double capped = 0.0;
  double cap_threshold = std::numeric_limits<double>::infinity();
};

struct Aggregation {
  std::map<std::string, AggregatedUtility> units;
  std::size_t excluded_without_search = 0;
};

// V_t for t = 1..T from the pair's cumulative states, with V_0 = 0. Records
// come back in step order and telescope: the utilities sum to V_T.
std::vector<UtilityRecord> attribute_pair(const SurrogateModel& model, const JourneyStore& store,
                                          const std::string& user_id, const std::string& listing_id);
std::vector<UtilityRecord> attribute_pair(const SurrogateModel& model, const JourneyStore& store,
                                          std::size_t pair_index);
// Every pair of the store, in store order.
std::vector<UtilityRecord> attribute_all(const SurrogateModel& model, const JourneyStore& store);

// Sums utilities per unit, then caps the sum from above. Negative sums pass
// through. Records without a search_id are counted and skipped for search units.
Aggregation aggregate(std::span<const UtilityRecord> records, UnitKind unit, double cap_threshold);

// Largest |sum of utilities - V_T| over the pairs in the records.
double max_telescoping_error(std::span<const UtilityRecord> records);

// Throws validation when the model's training window overlaps the store's
// time range.
void check_scoring_window(const SurrogateModel& model, const JourneyStore& store);

struct MetricOptions {
  std::vector<double> caps = {1.0};
  std::vector<std::string> roster;  // extra zero-activity units
  bool allow_overlap = false;
};

// Utility column ("utility") plus one capped column per cap, one row per unit
// seen in the store or listed in the roster.
MetricTable utility_metric_per_unit(const JourneyStore& store, const SurrogateModel& model, UnitKind unit,
                                    const MetricOptions& options);

// Utility columns plus the conventional per-unit metrics used as baselines:
// page_views, page_viewers, dated_page_viewers, bookings, bookers for users;
// page_views and booked_clicks for searches; page_views and bookings for
// listings.
MetricTable unit_metrics(const JourneyStore& store, std::span<const UtilityRecord> records, UnitKind unit,
                         const MetricOptions& options);

std::string capped_column_name(double cap);

void write_utility_csv(std::ostream& out, std::span<const UtilityRecord> records);
void write_aggregated_csv(std::ostream& out, UnitKind unit, std::span<const double> caps,
                          std::span<const UtilityRecord> records);

}  // namespace surrogate
