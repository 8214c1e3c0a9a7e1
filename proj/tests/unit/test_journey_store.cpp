#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "surrogate/error.hpp"
#include "surrogate/features.hpp"
#include "surrogate/io.hpp"
#include "surrogate/journey_store.hpp"
#include "surrogate/simulator.hpp"

using namespace surrogate;

namespace {

constexpr TimestampMs kT0 = 1'700'000'000'000;

InteractionEvent view(const std::string& id, TimestampMs ts, int photos = 0, const std::string& user = "u1",
                      const std::string& listing = "l1") {
  InteractionEvent e;
  e.event_id = id;
  e.timestamp_ms = ts;
  e.user_id = user;
  e.listing_id = listing;
  e.engagement.photos_viewed = photos;
  return e;
}

BookingOutcome booking(TimestampMs ts, const std::string& user = "u1", const std::string& listing = "l1") {
  return BookingOutcome{user, listing, ts, 1};
}

}  // namespace

TEST_CASE("shuffled events come back in timestamp order") {
  auto store = JourneyStore::ingest({view("c", kT0 + 300), view("a", kT0 + 100), view("b", kT0 + 200)}, {});
  const auto tl = store.timeline(PairKey{"u1", "l1"});
  REQUIRE(tl.size() == 3);
  CHECK(tl[0].event_id == "a");
  CHECK(tl[1].event_id == "b");
  CHECK(tl[2].event_id == "c");
}

TEST_CASE("repeated event id is dropped and counted") {
  auto store = JourneyStore::ingest({view("a", kT0 + 100), view("a", kT0 + 100)}, {});
  CHECK(store.timeline(PairKey{"u1", "l1"}).size() == 1);
  CHECK(store.report().duplicates_dropped == 1);
}

TEST_CASE("timestamp ties break on event id") {
  auto store = JourneyStore::ingest({view("b", kT0), view("a", kT0)}, {});
  CHECK(store.timeline(PairKey{"u1", "l1"})[0].event_id == "a");
}

TEST_CASE("state sums photos over the window") {
  auto store = JourneyStore::ingest({view("a", kT0, 2), view("b", kT0 + 10, 3), view("c", kT0 + 20, 1)}, {});
  const auto s = store.state_at("u1", "l1", 3);
  CHECK(s.cumulative.photos_viewed == 6);
  CHECK(s.view_count == 3);
  CHECK(s.step_index == 3);
}

TEST_CASE("view 15 days later evicts the earlier one") {
  auto store = JourneyStore::ingest({view("a", kT0, 4), view("b", kT0 + 15 * kMsPerDay, 1)}, {});
  const auto s = store.state_at("u1", "l1", 2);
  CHECK(s.view_count == 1);
  CHECK(s.step_index == 1);
  CHECK(s.cumulative.photos_viewed == 1);
  CHECK(s.window_start == kT0 + 15 * kMsPerDay);
}

TEST_CASE("unknown pair or step is not found") {
  auto store = JourneyStore::ingest({view("a", kT0)}, {});
  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::parse;
  };
  CHECK(kind_of([&] { store.state_at("u2", "l1", 1); }) == ErrorKind::not_found);
  CHECK(kind_of([&] { store.state_at("u1", "l1", 2); }) == ErrorKind::not_found);
  CHECK(kind_of([&] { store.state_at("u1", "l1", 0); }) == ErrorKind::not_found);
}

TEST_CASE("views after the first reserve click are dropped") {
  auto a = view("a", kT0);
  auto b = view("b", kT0 + 10);
  b.engagement.reserve_clicked = 1;
  auto c = view("c", kT0 + 20, 5);
  auto store = JourneyStore::ingest({a, b, c}, {});
  CHECK(store.timeline(PairKey{"u1", "l1"}).size() == 2);
  CHECK(store.report().post_reserve_dropped == 1);

  StoreOptions keep;
  keep.exclude_post_reserve = false;
  auto full = JourneyStore::ingest({a, b, c}, {}, {}, keep);
  CHECK(full.timeline(PairKey{"u1", "l1"}).size() == 3);
}

TEST_CASE("three views then a booking give three positives") {
  auto store = JourneyStore::ingest({view("a", kT0), view("b", kT0 + 10), view("c", kT0 + 20)}, {booking(kT0 + 30)});
  const auto set = build_training_set(store);
  REQUIRE(set.size() == 3);
  CHECK(std::count(set.labels.begin(), set.labels.end(), 1) == 3);
}

TEST_CASE("three views without a booking give three negatives") {
  auto store = JourneyStore::ingest({view("a", kT0), view("b", kT0 + 10), view("c", kT0 + 20)}, {});
  const auto set = build_training_set(store);
  REQUIRE(set.size() == 3);
  CHECK(std::count(set.labels.begin(), set.labels.end(), 0) == 3);
}

TEST_CASE("views after the booking produce no example") {
  auto store = JourneyStore::ingest({view("a", kT0), view("b", kT0 + 50)}, {booking(kT0 + 10)});
  const auto set = build_training_set(store);
  REQUIRE(set.size() == 1);
  CHECK(set.labels[0] == 1);
  CHECK(set.timestamps[0] == kT0);
}

TEST_CASE("booking beyond the label horizon labels earlier views negative") {
  auto store = JourneyStore::ingest({view("a", kT0), view("b", kT0 + 10 * kMsPerDay)},
                                    {booking(kT0 + 16 * kMsPerDay)});
  const auto set = build_training_set(store);
  REQUIRE(set.size() == 2);
  CHECK(set.labels[0] == 0);
  CHECK(set.labels[1] == 1);
}

TEST_CASE("pair_final keeps one example per pair") {
  auto store = JourneyStore::ingest({view("a", kT0), view("b", kT0 + 10), view("c", kT0 + 20, 0, "u2")},
                                    {booking(kT0 + 30)});
  TrainingOptions o;
  o.scope = LabelScope::pair_final;
  const auto set = build_training_set(store, o);
  REQUIRE(set.size() == 2);
}

TEST_CASE("empty store gives an empty training set") {
  JourneyStore store;
  CHECK(build_training_set(store).size() == 0);
}

TEST_CASE("zero-engagement first view encodes zeros and view count 1") {
  auto store = JourneyStore::ingest({view("a", kT0)}, {});
  const auto phi = feature_vector(store.state_at("u1", "l1", 1));
  for (std::size_t k = 0; k < 7; ++k) CHECK(phi[k] == 0.0);
  CHECK(phi[7] == 1.0);
}

TEST_CASE("absent trip dates encode the sentinel and a zero flag") {
  auto store = JourneyStore::ingest({view("a", kT0)}, {});
  const auto phi = feature_vector(store.state_at("u1", "l1", 1));
  CHECK(phi[15] == 0.0);
  CHECK(phi[16] == kMissing);
  CHECK(phi[17] == kMissing);
}

TEST_CASE("lead time counts days from the view date to check-in") {
  auto e = view("a", kT0);
  e.trip.checkin = date_of(kT0) + std::chrono::days{9};
  e.trip.checkout = date_of(kT0) + std::chrono::days{12};
  auto store = JourneyStore::ingest({e}, {});
  const auto phi = feature_vector(store.state_at("u1", "l1", 1));
  CHECK(phi[15] == 1.0);
  CHECK(phi[16] == 3.0);
  CHECK(phi[17] == 9.0);
}

TEST_CASE("encoding the same state twice is bit-identical") {
  auto store = JourneyStore::ingest({view("a", kT0, 3)}, {});
  const auto s = store.state_at("u1", "l1", 1);
  CHECK(feature_vector(s) == feature_vector(s));
}

TEST_CASE("jsonl round trip keeps every field") {
  auto e = view("e1", kT0, 2);
  e.search_id = "s1";
  e.arm = "treatment";
  e.engagement.dwell_seconds = 12.5;
  e.engagement.host_contacted = 1;
  e.trip.checkin = date_of(kT0) + std::chrono::days{3};
  e.trip.checkout = date_of(kT0) + std::chrono::days{5};
  e.trip.num_guests = 2;
  std::ostringstream out;
  write_event_jsonl(out, e);
  CHECK(parse_event_line(out.str()) == e);
}

TEST_CASE("malformed lines are reported with their line numbers") {
  std::istringstream in(
      "{\"event_id\":\"a\",\"ts_ms\":5,\"user_id\":\"u\",\"listing_id\":\"l\"}\n"
      "not json\n"
      "{\"event_id\":\"b\",\"ts_ms\":-1,\"user_id\":\"u\",\"listing_id\":\"l\"}\n"
      "{\"event_id\":\"c\",\"ts_ms\":7,\"user_id\":\"u\",\"listing_id\":\"l\",\"host_contacted\":2}\n"
      "{\"event_id\":\"d\",\"ts_ms\":9,\"user_id\":\"u\",\"listing_id\":\"l\",\"checkin\":\"2024-01-05\",\"checkout\":\"2024-01-05\"}\n");
  const auto log = read_events_jsonl(in);
  CHECK(log.items.size() == 1);
  REQUIRE(log.errors.size() == 4);
  CHECK(log.errors[0].line == 2);
  CHECK(log.errors[1].line == 3);
  CHECK(log.errors[2].line == 4);
  CHECK(log.errors[3].line == 5);
}

TEST_CASE("listing csv rejects out-of-range attributes") {
  std::istringstream in(
      "listing_id,price_per_night,review_score,review_count,availability_days,past_bookings,location_bucket\n"
      "l1,100.00,4.50,10,30,2,1\n"
      "l2,0,4.50,10,30,2,1\n"
      "l3,100,5.5,10,30,2,1\n");
  const auto rows = read_listings_csv(in);
  CHECK(rows.items.size() == 1);
  CHECK(rows.errors.size() == 2);
}

TEST_CASE("sliding states match a brute-force rescan of the raw log") {
  std::mt19937_64 rng(11);
  std::vector<InteractionEvent> log;
  for (int i = 0; i < 600; ++i) {
    auto e = view("e" + std::to_string(i), kT0 + static_cast<TimestampMs>(rng() % (40 * kMsPerDay)),
                  static_cast<int>(rng() % 5), "u" + std::to_string(rng() % 4), "l" + std::to_string(rng() % 5));
    e.engagement.reviews_viewed = static_cast<std::int64_t>(rng() % 3);
    e.engagement.dwell_seconds = static_cast<double>(rng() % 1000) / 10.0;
    e.engagement.reserve_clicked = rng() % 40 == 0 ? 1 : 0;
    log.push_back(e);
  }
  auto shuffled = log;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto store = JourneyStore::ingest(shuffled, {});
  for (std::size_t p = 0; p < store.pair_count(); ++p) {
    const auto& key = store.pairs()[p];
    const auto states = store.states(p);
    for (std::size_t t = 1; t <= states.size(); ++t) {
      const auto ref = oracle::brute_force_state(log, key.user_id, key.listing_id, t, 14 * kMsPerDay);
      const auto got = store.state_at(key.user_id, key.listing_id, t);
      CHECK(got.cumulative == ref.sum);
      CHECK(got.view_count == ref.view_count);
      CHECK(got.window_start == ref.window_start);
      CHECK(states[t - 1].cumulative == ref.sum);
      CHECK(got.window_end - got.window_start <= 14 * kMsPerDay);
    }
  }
}

TEST_CASE("cumulative signals never decrease inside one window") {
  std::mt19937_64 rng(5);
  std::vector<InteractionEvent> log;
  for (int i = 0; i < 200; ++i) {
    log.push_back(view("e" + std::to_string(i), kT0 + static_cast<TimestampMs>(rng() % (5 * kMsPerDay)),
                       static_cast<int>(rng() % 4), "u" + std::to_string(rng() % 3), "l" + std::to_string(rng() % 3)));
  }
  const auto store = JourneyStore::ingest(log, {});
  for (std::size_t p = 0; p < store.pair_count(); ++p) {
    const auto states = store.states(p);
    for (std::size_t t = 1; t < states.size(); ++t) {
      CHECK(states[t].cumulative.photos_viewed >= states[t - 1].cumulative.photos_viewed);
      CHECK(states[t].view_count == t + 1);
    }
  }
}

TEST_CASE("arrival order does not change the store") {
  std::mt19937_64 rng(9);
  std::vector<InteractionEvent> log;
  for (int i = 0; i < 100; ++i) {
    log.push_back(view("e" + std::to_string(i % 80), kT0 + static_cast<TimestampMs>(rng() % 1000),
                       static_cast<int>(rng() % 4), "u" + std::to_string(rng() % 3), "l1"));
  }
  const auto a = JourneyStore::ingest(log, {});
  std::reverse(log.begin(), log.end());
  const auto b = JourneyStore::ingest(log, {});
  REQUIRE(a.pair_count() == b.pair_count());
  for (std::size_t p = 0; p < a.pair_count(); ++p) {
    const auto ta = a.timeline(p), tb = b.timeline(p);
    CHECK(std::equal(ta.begin(), ta.end(), tb.begin(), tb.end()));
  }
}

TEST_CASE("a million simulated events keep the simulator's pair count") {
  SimConfig c;
  c.n_users = 112'000;
  c.seed = 21;
  const auto out = simulate(c);
  CHECK(out.events.size() >= 1'000'000);
  const auto store = JourneyStore::ingest(out.events, out.outcomes, out.listings);
  CHECK(store.pair_count() == out.pair_count);
  CHECK(store.report().duplicates_dropped == 0);
}

TEST_CASE("positive-example fraction matches a direct log scan at a 5% rate") {
  SimConfig c;
  c.n_users = 20'000;
  c.seed = 4;
  c.propensity_intercept = -5.2;  // puts the per-view positive rate near 5%
  const auto out = simulate(c);
  const auto store = JourneyStore::ingest(out.events, out.outcomes, out.listings);
  const auto set = build_training_set(store);
  const double got = static_cast<double>(std::count(set.labels.begin(), set.labels.end(), 1)) /
                     static_cast<double>(set.size());
  const double ref = oracle::log_scan_positive_rate(out.events, out.outcomes, 14 * kMsPerDay);
  MESSAGE("per-view positive rate " << ref);
  CHECK(ref > 0.035);
  CHECK(ref < 0.065);
  CHECK(std::abs(got - ref) <= 0.005);
}
