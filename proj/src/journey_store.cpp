#include "surrogate/journey_store.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <tuple>

#include "surrogate/error.hpp"

namespace surrogate {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::not_found, "cannot open " + path);
  return in;
}

void append_errors(IngestReport& report, const std::vector<LineError>& errors, const std::string& source) {
  for (const auto& e : errors) report.errors.push_back({e.line, source + ": " + e.message});
}

auto dedup_key(const InteractionEvent& e) {
  const auto& g = e.engagement;
  return std::tie(e.event_id, e.timestamp_ms, e.user_id, e.listing_id, e.search_id, e.arm, g.photos_viewed,
                  g.reviews_viewed, g.amenities_viewed, g.calendar_checked, g.host_contacted, g.reserve_clicked,
                  g.dwell_seconds, e.trip.checkin, e.trip.checkout, e.trip.num_guests);
}

}  // namespace

JourneyStore JourneyStore::ingest(std::vector<InteractionEvent> events, std::vector<BookingOutcome> outcomes,
                                  std::vector<ListingAttributes> listings, StoreOptions options) {
  if (options.lookback_ms <= 0) fail(ErrorKind::invalid_argument, "lookback must be positive");
  JourneyStore store;
  store.options_ = options;
  auto& report = store.report_;
  report.events_in = events.size();

  // Dedup on event_id under a total order so arrival order never matters.
  std::sort(events.begin(), events.end(), [](const InteractionEvent& a, const InteractionEvent& b) {
    return dedup_key(a) < dedup_key(b);
  });
  auto last = std::unique(events.begin(), events.end(),
                          [](const InteractionEvent& a, const InteractionEvent& b) { return a.event_id == b.event_id; });
  report.duplicates_dropped = static_cast<std::size_t>(events.end() - last);
  events.erase(last, events.end());

  std::sort(events.begin(), events.end(), [](const InteractionEvent& a, const InteractionEvent& b) {
    return std::tie(a.user_id, a.listing_id, a.timestamp_ms, a.event_id) <
           std::tie(b.user_id, b.listing_id, b.timestamp_ms, b.event_id);
  });

  store.min_ts_ = std::numeric_limits<TimestampMs>::max();
  store.max_ts_ = std::numeric_limits<TimestampMs>::min();
  for (std::size_t i = 0; i < events.size();) {
    std::size_t j = i;
    while (j < events.size() && events[j].user_id == events[i].user_id &&
           events[j].listing_id == events[i].listing_id)
      ++j;
    std::vector<InteractionEvent> timeline;
    timeline.reserve(j - i);
    for (std::size_t k = i; k < j; ++k) {
      timeline.push_back(std::move(events[k]));
      if (options.exclude_post_reserve && timeline.back().engagement.reserve_clicked) {
        report.post_reserve_dropped += j - k - 1;
        break;
      }
    }
    for (const auto& e : timeline) {
      store.min_ts_ = std::min(store.min_ts_, e.timestamp_ms);
      store.max_ts_ = std::max(store.max_ts_, e.timestamp_ms);
    }
    report.events_kept += timeline.size();
    store.pairs_.push_back({timeline.front().user_id, timeline.front().listing_id});
    store.timelines_.push_back(std::move(timeline));
    i = j;
  }
  if (store.timelines_.empty()) store.min_ts_ = store.max_ts_ = 0;
  store.bookings_.resize(store.pairs_.size());

  report.outcomes_in = outcomes.size();
  std::sort(outcomes.begin(), outcomes.end(), [](const BookingOutcome& a, const BookingOutcome& b) {
    return std::tie(a.user_id, a.listing_id, a.timestamp_ms, a.value) <
           std::tie(b.user_id, b.listing_id, b.timestamp_ms, b.value);
  });
  for (auto& o : outcomes) {
    if (o.value != 1) continue;
    ++report.positive_outcomes;
    auto idx = store.find({o.user_id, o.listing_id});
    if (!idx) continue;
    auto& slot = store.bookings_[*idx];
    if (slot) ++report.extra_positive_outcomes;
    else slot = std::move(o);
  }

  for (auto& l : listings) {
    auto id = l.listing_id;
    store.listings_.insert_or_assign(std::move(id), std::move(l));
  }
  return store;
}

JourneyStore JourneyStore::load(const std::string& events_path, const std::string& outcomes_path,
                                const std::string& listings_path, StoreOptions options) {
  auto events_in = open_input(events_path);
  auto events = read_events_jsonl(events_in);
  ParsedLog<BookingOutcome> outcomes;
  if (!outcomes_path.empty()) {
    auto in = open_input(outcomes_path);
    outcomes = read_outcomes_jsonl(in);
  }
  ParsedLog<ListingAttributes> listings;
  if (!listings_path.empty()) {
    auto in = open_input(listings_path);
    listings = read_listings_csv(in);
  }
  auto store = ingest(std::move(events.items), std::move(outcomes.items), std::move(listings.items), options);
  append_errors(store.report_, events.errors, events_path);
  append_errors(store.report_, outcomes.errors, outcomes_path);
  append_errors(store.report_, listings.errors, listings_path);
  return store;
}

std::size_t JourneyStore::event_count() const {
  std::size_t n = 0;
  for (const auto& t : timelines_) n += t.size();
  return n;
}

std::optional<std::size_t> JourneyStore::find(const PairKey& pair) const {
  auto it = std::lower_bound(pairs_.begin(), pairs_.end(), pair);
  if (it == pairs_.end() || *it != pair) return std::nullopt;
  return static_cast<std::size_t>(it - pairs_.begin());
}

std::size_t JourneyStore::require(const PairKey& pair) const {
  auto idx = find(pair);
  if (!idx) fail(ErrorKind::not_found, "unknown pair (" + pair.user_id + ", " + pair.listing_id + ")");
  return *idx;
}

std::span<const InteractionEvent> JourneyStore::timeline(const PairKey& pair) const {
  return timelines_[require(pair)];
}

std::optional<BookingOutcome> JourneyStore::booking(const PairKey& pair) const {
  return bookings_[require(pair)];
}

const ListingAttributes* JourneyStore::listing(const std::string& listing_id) const {
  auto it = listings_.find(listing_id);
  return it == listings_.end() ? nullptr : &it->second;
}

std::vector<std::string> JourneyStore::users() const {
  std::vector<std::string> out;
  for (const auto& p : pairs_)
    if (out.empty() || out.back() != p.user_id) out.push_back(p.user_id);
  return out;
}

EpisodeState JourneyStore::base_state(std::size_t pair_index) const {
  EpisodeState s;
  s.user_id = pairs_[pair_index].user_id;
  s.listing_id = pairs_[pair_index].listing_id;
  if (const auto* l = listing(s.listing_id)) s.listing = *l;
  return s;
}

EpisodeState JourneyStore::state_at(const std::string& user_id, const std::string& listing_id, std::size_t t) const {
  const auto idx = require({user_id, listing_id});
  const auto& views = timelines_[idx];
  if (t < 1 || t > views.size())
    fail(ErrorKind::not_found, "step " + std::to_string(t) + " out of range for pair (" + user_id + ", " +
                                   listing_id + ") with " + std::to_string(views.size()) + " views");
  EpisodeState s = base_state(idx);
  const auto& view = views[t - 1];
  const TimestampMs cutoff = view.timestamp_ms - options_.lookback_ms;
  std::size_t first = 0;
  while (views[first].timestamp_ms < cutoff) ++first;
  for (std::size_t k = first; k < t; ++k) s.cumulative += views[k].engagement;
  s.view_count = t - first;
  s.step_index = s.view_count;
  s.window_start = views[first].timestamp_ms;
  s.window_end = view.timestamp_ms;
  s.trip = view.trip;
  return s;
}

std::vector<EpisodeState> JourneyStore::states(std::size_t pair_index) const {
  const auto& views = timelines_[pair_index];
  std::vector<EpisodeState> out;
  out.reserve(views.size());
  EpisodeState s = base_state(pair_index);
  std::size_t first = 0;
  for (std::size_t t = 0; t < views.size(); ++t) {
    const TimestampMs cutoff = views[t].timestamp_ms - options_.lookback_ms;
    const std::size_t prev_first = first;
    while (views[first].timestamp_ms < cutoff) ++first;
    if (first != prev_first) {
      // Evictions: re-sum in view order so results match a fresh scan exactly.
      s.cumulative = {};
      for (std::size_t k = first; k <= t; ++k) s.cumulative += views[k].engagement;
    } else {
      s.cumulative += views[t].engagement;
    }
    s.view_count = t + 1 - first;
    s.step_index = s.view_count;
    s.window_start = views[first].timestamp_ms;
    s.window_end = views[t].timestamp_ms;
    s.trip = views[t].trip;
    out.push_back(s);
  }
  return out;
}

std::vector<EpisodeState> JourneyStore::states(const PairKey& pair) const { return states(require(pair)); }

LabeledSet build_training_set(const JourneyStore& store, const TrainingOptions& options) {
  if (options.label_horizon_days < 0) fail(ErrorKind::invalid_argument, "label horizon must be nonnegative");
  const TimestampMs horizon = options.label_horizon_days * kMsPerDay;
  LabeledSet set;
  for (std::size_t p = 0; p < store.pair_count(); ++p) {
    const auto& booking = store.booking(p);
    const auto views = store.timeline(p);
    std::size_t usable = views.size();
    if (booking) {
      usable = 0;
      while (usable < views.size() && views[usable].timestamp_ms <= booking->timestamp_ms) ++usable;
    }
    if (usable == 0) continue;
    const auto states = store.states(p);
    const std::size_t begin = options.scope == LabelScope::pair_final ? usable - 1 : 0;
    for (std::size_t t = begin; t < usable; ++t) {
      const TimestampMs ts = views[t].timestamp_ms;
      const int label = booking && booking->timestamp_ms - ts <= horizon ? 1 : 0;
      set.rows.push_back(feature_vector(states[t]));
      set.labels.push_back(label);
      set.timestamps.push_back(ts);
    }
  }
  return set;
}

}  // namespace surrogate
