#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surrogate/features.hpp"
#include "surrogate/io.hpp"
#include "surrogate/types.hpp"

namespace surrogate {

struct StoreOptions {
  TimestampMs lookback_ms = 14 * kMsPerDay;
  // Drop a pair's views that follow its first "Reserve" click (checkout-page
  // engagement does not feed the state).
  bool exclude_post_reserve = true;
};

struct IngestReport {
  std::size_t events_in = 0;
  std::size_t events_kept = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t post_reserve_dropped = 0;
  std::size_t outcomes_in = 0;
  std::size_t positive_outcomes = 0;
  std::size_t extra_positive_outcomes = 0;  // beyond the first per pair
  std::vector<LineError> errors;            // carried over from file parsing
};

// Per-(user, listing) timelines built once from a log; immutable afterwards.
class JourneyStore {
 public:
  JourneyStore() = default;

  static JourneyStore ingest(std::vector<InteractionEvent> events, std::vector<BookingOutcome> outcomes,
                             std::vector<ListingAttributes> listings = {}, StoreOptions options = {});

  // Reads the JSONL/CSV files; per-line problems land in report().errors.
  static JourneyStore load(const std::string& events_path, const std::string& outcomes_path,
                           const std::string& listings_path, StoreOptions options = {});

  const IngestReport& report() const { return report_; }
  const StoreOptions& options() const { return options_; }

  std::size_t pair_count() const { return pairs_.size(); }
  std::size_t event_count() const;
  std::span<const PairKey> pairs() const { return pairs_; }
  bool contains(const PairKey& pair) const { return find(pair).has_value(); }

  // Views of the pair in (timestamp, event_id) order. Throws not_found.
  std::span<const InteractionEvent> timeline(const PairKey& pair) const;
  std::span<const InteractionEvent> timeline(std::size_t pair_index) const { return timelines_[pair_index]; }

  // Earliest positive booking outcome of the pair, if any.
  std::optional<BookingOutcome> booking(const PairKey& pair) const;
  const std::optional<BookingOutcome>& booking(std::size_t pair_index) const { return bookings_[pair_index]; }

  const ListingAttributes* listing(const std::string& listing_id) const;

  // Cumulative state at the t-th view (1-based) of the pair's timeline. Views
  // older than lookback before view t are excluded and step indices are
  // recounted over the survivors. Throws not_found for unknown pairs or t out
  // of range.
  EpisodeState state_at(const std::string& user_id, const std::string& listing_id, std::size_t t) const;

  // States for every view of the pair, computed with one sliding pass.
  std::vector<EpisodeState> states(std::size_t pair_index) const;
  std::vector<EpisodeState> states(const PairKey& pair) const;

  TimestampMs min_timestamp() const { return min_ts_; }
  TimestampMs max_timestamp() const { return max_ts_; }

  std::vector<std::string> users() const;

 private:
  std::optional<std::size_t> find(const PairKey& pair) const;
  std::size_t require(const PairKey& pair) const;
  EpisodeState base_state(std::size_t pair_index) const;

  StoreOptions options_;
  IngestReport report_;
  std::vector<PairKey> pairs_;  // sorted
  std::vector<std::vector<InteractionEvent>> timelines_;
  std::vector<std::optional<BookingOutcome>> bookings_;
  std::map<std::string, ListingAttributes, std::less<>> listings_;
  TimestampMs min_ts_ = 0;
  TimestampMs max_ts_ = 0;
};

enum class LabelScope {
  per_step,    // one example per pre-booking view
  pair_final,  // one example per pair: the last pre-booking view
};

struct TrainingOptions {
  std::int64_t label_horizon_days = 14;
  LabelScope scope = LabelScope::per_step;
};

struct LabeledSet {
  std::size_t feature_count = kFeatureCount;
  std::vector<FeatureVector> rows;
  std::vector<int> labels;
  std::vector<TimestampMs> timestamps;  // view time of each example

  std::size_t size() const { return rows.size(); }
};

// Label = 1 iff the pair's positive outcome lands at or after the view and
// within the label horizon. Views after the booking produce no example.
LabeledSet build_training_set(const JourneyStore& store, const TrainingOptions& options = {});

}  // namespace surrogate
