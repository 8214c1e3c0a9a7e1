#include "surrogate/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "surrogate/error.hpp"

namespace surrogate {

namespace {

using nlohmann::json;

const json* field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

const json& required(const json& obj, const char* name) {
  const json* f = field(obj, name);
  if (!f) fail(ErrorKind::parse, std::string("missing field '") + name + "'");
  return *f;
}

std::string required_string(const json& obj, const char* name) {
  const json& f = required(obj, name);
  if (!f.is_string()) fail(ErrorKind::parse, std::string("field '") + name + "' must be a string");
  auto s = f.get<std::string>();
  if (s.empty()) fail(ErrorKind::parse, std::string("field '") + name + "' is empty");
  return s;
}

std::optional<std::string> optional_string(const json& obj, const char* name) {
  const json* f = field(obj, name);
  if (!f) return std::nullopt;
  if (!f->is_string()) fail(ErrorKind::parse, std::string("field '") + name + "' must be a string");
  return f->get<std::string>();
}

TimestampMs timestamp(const json& obj) {
  const json& f = required(obj, "ts_ms");
  if (!f.is_number_integer()) fail(ErrorKind::parse, "timestamp 'ts_ms' is not an integer");
  const auto ts = f.get<std::int64_t>();
  if (ts <= 0) fail(ErrorKind::parse, "timestamp 'ts_ms' must be positive");
  return ts;
}

std::int64_t count(const json& obj, const char* name) {
  const json* f = field(obj, name);
  if (!f) return 0;
  if (!f->is_number_integer()) fail(ErrorKind::parse, std::string("field '") + name + "' must be an integer");
  const auto v = f->get<std::int64_t>();
  if (v < 0) fail(ErrorKind::parse, std::string("field '") + name + "' is negative");
  return v;
}

std::int64_t flag(const json& obj, const char* name) {
  const auto v = count(obj, name);
  if (v > 1) fail(ErrorKind::parse, std::string("field '") + name + "' must be 0 or 1");
  return v;
}

std::optional<Date> date_field(const json& obj, const char* name) {
  auto s = optional_string(obj, name);
  if (!s) return std::nullopt;
  auto d = parse_date(*s);
  if (!d) fail(ErrorKind::parse, std::string("field '") + name + "' is not a YYYY-MM-DD date");
  return d;
}

template <typename T, typename ParseLine>
ParsedLog<T> read_lines(std::istream& in, ParseLine parse) {
  ParsedLog<T> log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      log.items.push_back(parse(line));
    } catch (const Error& e) {
      log.errors.push_back({lineno, e.what()});
    }
  }
  return log;
}

json parse_object(std::string_view line) {
  json obj = json::parse(line.begin(), line.end(), nullptr, false);
  if (obj.is_discarded()) fail(ErrorKind::parse, "malformed JSON");
  if (!obj.is_object()) fail(ErrorKind::parse, "line is not a JSON object");
  return obj;
}

void put_optional(json& obj, const char* name, const std::optional<std::string>& v) {
  if (v) obj[name] = *v;
  else obj[name] = nullptr;
}

template <typename T>
T parse_number(const std::string& s, const char* name) {
  T v{};
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) fail(ErrorKind::parse, std::string("bad ") + name + " '" + s + "'");
  return v;
}

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return ec == std::errc{} && p == text.data() + pos + len;
  };
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

InteractionEvent parse_event_line(std::string_view line) {
  const json obj = parse_object(line);
  InteractionEvent e;
  e.event_id = required_string(obj, "event_id");
  e.timestamp_ms = timestamp(obj);
  e.user_id = required_string(obj, "user_id");
  e.listing_id = required_string(obj, "listing_id");
  e.search_id = optional_string(obj, "search_id");
  e.arm = optional_string(obj, "arm");

  auto& g = e.engagement;
  g.photos_viewed = count(obj, "photos_viewed");
  g.reviews_viewed = count(obj, "reviews_viewed");
  g.amenities_viewed = count(obj, "amenities_viewed");
  g.calendar_checked = count(obj, "calendar_checked");
  g.host_contacted = flag(obj, "host_contacted");
  g.reserve_clicked = flag(obj, "reserve_clicked");
  if (const json* dwell = field(obj, "dwell_s")) {
    if (!dwell->is_number()) fail(ErrorKind::parse, "field 'dwell_s' must be a number");
    g.dwell_seconds = dwell->get<double>();
    if (!std::isfinite(g.dwell_seconds) || g.dwell_seconds < 0)
      fail(ErrorKind::parse, "field 'dwell_s' must be a nonnegative number");
  }

  e.trip.checkin = date_field(obj, "checkin");
  e.trip.checkout = date_field(obj, "checkout");
  if (e.trip.checkin && e.trip.checkout && *e.trip.checkout <= *e.trip.checkin)
    fail(ErrorKind::parse, "checkout must be after checkin");
  if (field(obj, "num_guests")) {
    const auto guests = count(obj, "num_guests");
    if (guests < 1) fail(ErrorKind::parse, "num_guests must be at least 1");
    e.trip.num_guests = guests;
  }
  return e;
}

ParsedLog<InteractionEvent> read_events_jsonl(std::istream& in) {
  return read_lines<InteractionEvent>(in, parse_event_line);
}

void write_event_jsonl(std::ostream& out, const InteractionEvent& e) {
  nlohmann::ordered_json obj;
  obj["event_id"] = e.event_id;
  obj["ts_ms"] = e.timestamp_ms;
  obj["user_id"] = e.user_id;
  obj["listing_id"] = e.listing_id;
  if (e.search_id) obj["search_id"] = *e.search_id;
  else obj["search_id"] = nullptr;
  if (e.arm) obj["arm"] = *e.arm;
  else obj["arm"] = nullptr;
  const auto& g = e.engagement;
  obj["photos_viewed"] = g.photos_viewed;
  obj["reviews_viewed"] = g.reviews_viewed;
  obj["amenities_viewed"] = g.amenities_viewed;
  obj["calendar_checked"] = g.calendar_checked;
  obj["host_contacted"] = g.host_contacted;
  obj["reserve_clicked"] = g.reserve_clicked;
  obj["dwell_s"] = g.dwell_seconds;
  if (e.trip.checkin) obj["checkin"] = format_date(*e.trip.checkin);
  else obj["checkin"] = nullptr;
  if (e.trip.checkout) obj["checkout"] = format_date(*e.trip.checkout);
  else obj["checkout"] = nullptr;
  if (e.trip.num_guests) obj["num_guests"] = *e.trip.num_guests;
  else obj["num_guests"] = nullptr;
  out << obj.dump() << '\n';
}

BookingOutcome parse_outcome_line(std::string_view line) {
  const json obj = parse_object(line);
  BookingOutcome o;
  o.user_id = required_string(obj, "user_id");
  o.listing_id = required_string(obj, "listing_id");
  o.timestamp_ms = timestamp(obj);
  const json& y = required(obj, "y");
  if (!y.is_number_integer() || (y.get<int>() != 0 && y.get<int>() != 1))
    fail(ErrorKind::parse, "field 'y' must be 0 or 1");
  o.value = y.get<int>();
  return o;
}

ParsedLog<BookingOutcome> read_outcomes_jsonl(std::istream& in) {
  return read_lines<BookingOutcome>(in, parse_outcome_line);
}

void write_outcome_jsonl(std::ostream& out, const BookingOutcome& o) {
  nlohmann::ordered_json obj;
  obj["user_id"] = o.user_id;
  obj["listing_id"] = o.listing_id;
  obj["ts_ms"] = o.timestamp_ms;
  obj["y"] = o.value;
  out << obj.dump() << '\n';
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

ParsedLog<ListingAttributes> read_listings_csv(std::istream& in) {
  ParsedLog<ListingAttributes> log;
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("listing_id", 0) != 0) log.errors.push_back({lineno, "missing header row"});
      continue;
    }
    try {
      const auto cells = split_csv_line(line);
      if (cells.size() != 7) fail(ErrorKind::parse, "expected 7 columns");
      ListingAttributes l;
      l.listing_id = cells[0];
      if (l.listing_id.empty()) fail(ErrorKind::parse, "empty listing_id");
      l.price_per_night = parse_number<double>(cells[1], "price_per_night");
      l.review_score = parse_number<double>(cells[2], "review_score");
      l.review_count = parse_number<std::int64_t>(cells[3], "review_count");
      l.availability_days = parse_number<std::int64_t>(cells[4], "availability_days");
      l.past_bookings = parse_number<std::int64_t>(cells[5], "past_bookings");
      l.location_bucket = parse_number<std::int64_t>(cells[6], "location_bucket");
      if (!(l.price_per_night > 0)) fail(ErrorKind::parse, "price_per_night must be positive");
      if (!(l.review_score >= 0 && l.review_score <= 5)) fail(ErrorKind::parse, "review_score outside [0,5]");
      if (l.review_count < 0 || l.availability_days < 0 || l.past_bookings < 0)
        fail(ErrorKind::parse, "negative count");
      log.items.push_back(std::move(l));
    } catch (const Error& e) {
      log.errors.push_back({lineno, e.what()});
    }
  }
  return log;
}

void write_listings_csv(std::ostream& out, const std::vector<ListingAttributes>& listings) {
  out << "listing_id,price_per_night,review_score,review_count,availability_days,past_bookings,location_bucket\n";
  char buf[64];
  for (const auto& l : listings) {
    out << l.listing_id << ',';
    std::snprintf(buf, sizeof buf, "%.2f,%.2f,", l.price_per_night, l.review_score);
    out << buf << l.review_count << ',' << l.availability_days << ',' << l.past_bookings << ','
        << l.location_bucket << '\n';
  }
}

}  // namespace surrogate
