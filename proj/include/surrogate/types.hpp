#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

namespace surrogate {

using TimestampMs = std::int64_t;
using Date = std::chrono::sys_days;

inline constexpr TimestampMs kMsPerDay = 86'400'000;

// Engagement recorded on one listing page-view. The same struct holds
// cumulative sums, in which case the two flags become counts.
struct EngagementSignals {
  std::int64_t photos_viewed = 0;
  std::int64_t reviews_viewed = 0;
  std::int64_t amenities_viewed = 0;
  std::int64_t calendar_checked = 0;
  std::int64_t host_contacted = 0;
  std::int64_t reserve_clicked = 0;
  double dwell_seconds = 0.0;

  EngagementSignals& operator+=(const EngagementSignals& o) {
    photos_viewed += o.photos_viewed;
    reviews_viewed += o.reviews_viewed;
    amenities_viewed += o.amenities_viewed;
    calendar_checked += o.calendar_checked;
    host_contacted += o.host_contacted;
    reserve_clicked += o.reserve_clicked;
    dwell_seconds += o.dwell_seconds;
    return *this;
  }

  friend bool operator==(const EngagementSignals&, const EngagementSignals&) = default;
};

struct TripContext {
  std::optional<Date> checkin;
  std::optional<Date> checkout;
  std::optional<std::int64_t> num_guests;

  friend bool operator==(const TripContext&, const TripContext&) = default;
};

struct ListingAttributes {
  std::string listing_id;
  double price_per_night = 1.0;
  double review_score = 0.0;
  std::int64_t review_count = 0;
  std::int64_t availability_days = 0;
  std::int64_t past_bookings = 0;
  std::int64_t location_bucket = 0;

  friend bool operator==(const ListingAttributes&, const ListingAttributes&) = default;
};

struct InteractionEvent {
  std::string event_id;
  TimestampMs timestamp_ms = 0;
  std::string user_id;
  std::string listing_id;
  std::optional<std::string> search_id;
  std::optional<std::string> arm;
  EngagementSignals engagement;
  TripContext trip;

  friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

struct BookingOutcome {
  std::string user_id;
  std::string listing_id;
  TimestampMs timestamp_ms = 0;
  int value = 0;

  friend bool operator==(const BookingOutcome&, const BookingOutcome&) = default;
};

struct PairKey {
  std::string user_id;
  std::string listing_id;

  friend auto operator<=>(const PairKey&, const PairKey&) = default;
  friend bool operator==(const PairKey&, const PairKey&) = default;
};

// Cumulative state S_t of one (user, listing) pair at its t-th view.
struct EpisodeState {
  std::string user_id;
  std::string listing_id;
  std::size_t step_index = 0;  // 1-based, counted over in-window views
  TimestampMs window_start = 0;
  TimestampMs window_end = 0;
  EngagementSignals cumulative;
  std::size_t view_count = 0;
  std::optional<ListingAttributes> listing;
  TripContext trip;
  std::optional<int> label;
};

inline Date date_of(TimestampMs ts) {
  return Date{std::chrono::days{ts >= 0 ? ts / kMsPerDay : (ts - kMsPerDay + 1) / kMsPerDay}};
}

// Days from the event's UTC date to check-in, when check-in is known.
inline std::optional<std::int64_t> lead_time_days(const TripContext& trip, TimestampMs event_ts) {
  if (!trip.checkin) return std::nullopt;
  return (*trip.checkin - date_of(event_ts)).count();
}

}  // namespace surrogate
