#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "surrogate/types.hpp"

namespace surrogate {

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

template <typename T>
struct ParsedLog {
  std::vector<T> items;
  std::vector<LineError> errors;
};

std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date d);

// Event log: one JSON object per line with the fields event_id, ts_ms, user_id,
// listing_id, search_id, arm, photos_viewed, reviews_viewed, amenities_viewed,
// calendar_checked, host_contacted, reserve_clicked, dwell_s, checkin, checkout,
// num_guests. Optional fields may be null or absent. Bad lines are reported and
// skipped.
ParsedLog<InteractionEvent> read_events_jsonl(std::istream& in);
InteractionEvent parse_event_line(std::string_view line);
void write_event_jsonl(std::ostream& out, const InteractionEvent& e);

// Outcomes: user_id, listing_id, ts_ms, y.
ParsedLog<BookingOutcome> read_outcomes_jsonl(std::istream& in);
BookingOutcome parse_outcome_line(std::string_view line);
void write_outcome_jsonl(std::ostream& out, const BookingOutcome& o);

// Listing attributes CSV with header:
// listing_id,price_per_night,review_score,review_count,availability_days,past_bookings,location_bucket
ParsedLog<ListingAttributes> read_listings_csv(std::istream& in);
void write_listings_csv(std::ostream& out, const std::vector<ListingAttributes>& listings);

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace surrogate
