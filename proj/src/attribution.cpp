#include "surrogate/attribution.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <set>

#include "surrogate/error.hpp"
#include "surrogate/features.hpp"

namespace surrogate {

std::string to_string(UnitKind kind) {
  switch (kind) {
    case UnitKind::user: return "user";
    case UnitKind::search: return "search";
    case UnitKind::listing: return "listing";
  }
  return "user";
}

UnitKind parse_unit_kind(const std::string& text) {
  if (text == "user") return UnitKind::user;
  if (text == "search") return UnitKind::search;
  if (text == "listing") return UnitKind::listing;
  fail(ErrorKind::invalid_argument, "unknown unit kind '" + text + "' (expected user, search or listing)");
}

std::vector<UtilityRecord> attribute_pair(const SurrogateModel& model, const JourneyStore& store,
                                          std::size_t pair_index) {
  if (model.feature_count != kFeatureCount)
    fail(ErrorKind::invalid_argument, "model has " + std::to_string(model.feature_count) +
                                          " features; the state encoder produces " + std::to_string(kFeatureCount));
  const auto views = store.timeline(pair_index);
  const auto states = store.states(pair_index);
  std::vector<UtilityRecord> out;
  out.reserve(views.size());
  std::array<double, kFeatureCount> x{};
  double prev = 0.0;
  for (std::size_t t = 0; t < views.size(); ++t) {
    encode_features(states[t], x);
    const double v = model.predict(x);
    const auto& e = views[t];
    out.push_back({e.event_id, e.user_id, e.listing_id, e.search_id, t + 1, e.timestamp_ms, prev, v, v - prev});
    prev = v;
  }
  return out;
}

std::vector<UtilityRecord> attribute_pair(const SurrogateModel& model, const JourneyStore& store,
                                          const std::string& user_id, const std::string& listing_id) {
  const auto pairs = store.pairs();
  const PairKey key{user_id, listing_id};
  auto it = std::lower_bound(pairs.begin(), pairs.end(), key);
  if (it == pairs.end() || *it != key)
    fail(ErrorKind::not_found, "unknown pair (" + user_id + ", " + listing_id + ")");
  return attribute_pair(model, store, static_cast<std::size_t>(it - pairs.begin()));
}

std::vector<UtilityRecord> attribute_all(const SurrogateModel& model, const JourneyStore& store) {
  std::vector<UtilityRecord> out;
  out.reserve(store.event_count());
  for (std::size_t p = 0; p < store.pair_count(); ++p) {
    auto recs = attribute_pair(model, store, p);
    std::move(recs.begin(), recs.end(), std::back_inserter(out));
  }
  return out;
}

namespace {

const std::string* unit_of(const UtilityRecord& r, UnitKind unit) {
  switch (unit) {
    case UnitKind::user: return &r.user_id;
    case UnitKind::listing: return &r.listing_id;
    case UnitKind::search: return r.search_id ? &*r.search_id : nullptr;
  }
  return nullptr;
}

}  // namespace

Aggregation aggregate(std::span<const UtilityRecord> records, UnitKind unit, double cap_threshold) {
  if (!(cap_threshold > 0)) fail(ErrorKind::invalid_argument, "cap threshold must be positive");
  Aggregation agg;
  for (const auto& r : records) {
    const std::string* id = unit_of(r, unit);
    if (!id) {
      ++agg.excluded_without_search;
      continue;
    }
    auto [it, inserted] = agg.units.try_emplace(*id);
    if (inserted) {
      it->second.unit_kind = unit;
      it->second.unit_id = *id;
      it->second.cap_threshold = cap_threshold;
    }
    it->second.raw_sum += r.utility;
  }
  for (auto& [id, u] : agg.units) u.capped = std::min(u.raw_sum, cap_threshold);
  return agg;
}

double max_telescoping_error(std::span<const UtilityRecord> records) {
  double worst = 0.0;
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < records.size() && records[j].user_id == records[i].user_id &&
           records[j].listing_id == records[i].listing_id) {
      sum += records[j].utility;
      ++j;
    }
    worst = std::max(worst, std::abs(sum - records[j - 1].v_curr));
    i = j;
  }
  return worst;
}

void check_scoring_window(const SurrogateModel& model, const JourneyStore& store) {
  if (model.meta.examples == 0 || store.pair_count() == 0) return;
  const bool overlap =
      model.meta.window_end >= store.min_timestamp() && model.meta.window_start <= store.max_timestamp();
  if (overlap)
    fail(ErrorKind::validation,
         "model training window [" + std::to_string(model.meta.window_start) + ", " +
             std::to_string(model.meta.window_end) + "] overlaps the scoring window [" +
             std::to_string(store.min_timestamp()) + ", " + std::to_string(store.max_timestamp()) +
             "]; pass the overlap override to score anyway");
}

std::string capped_column_name(double cap) {
  if (std::isinf(cap)) return "utility_capped_inf";
  return "utility_capped_" + format_double(cap);
}

namespace {

std::vector<std::string> roster_union(std::set<std::string> seen, const std::vector<std::string>& roster) {
  seen.insert(roster.begin(), roster.end());
  return {seen.begin(), seen.end()};
}

}  // namespace

MetricTable unit_metrics(const JourneyStore& store, std::span<const UtilityRecord> records, UnitKind unit,
                         const MetricOptions& options) {
  for (double c : options.caps)
    if (!(c > 0)) fail(ErrorKind::invalid_argument, "cap threshold must be positive");

  std::set<std::string> seen;
  for (std::size_t p = 0; p < store.pair_count(); ++p)
    for (const auto& e : store.timeline(p)) {
      if (unit == UnitKind::user) seen.insert(e.user_id);
      else if (unit == UnitKind::listing) seen.insert(e.listing_id);
      else if (e.search_id) seen.insert(*e.search_id);
    }
  MetricTable table;
  table.unit_kind = to_string(unit);
  table.unit_ids = roster_union(std::move(seen), options.roster);
  const std::size_t n = table.unit_ids.size();
  auto row_of = [&](const std::string& id) {
    auto it = std::lower_bound(table.unit_ids.begin(), table.unit_ids.end(), id);
    return static_cast<std::size_t>(it - table.unit_ids.begin());
  };

  std::vector<double> page_views(n, 0.0), dated_views(n, 0.0), bookings(n, 0.0), booked_clicks(n, 0.0);
  for (std::size_t p = 0; p < store.pair_count(); ++p) {
    const auto& booking = store.booking(p);
    for (const auto& e : store.timeline(p)) {
      const std::string* id = unit == UnitKind::user      ? &e.user_id
                              : unit == UnitKind::listing ? &e.listing_id
                              : e.search_id               ? &*e.search_id
                                                          : nullptr;
      if (!id) continue;
      const auto r = row_of(*id);
      page_views[r] += 1;
      if (e.trip.checkin && e.trip.checkout) dated_views[r] += 1;
      if (booking && e.timestamp_ms <= booking->timestamp_ms) booked_clicks[r] += 1;
    }
    if (booking && unit != UnitKind::search) {
      const auto& id = unit == UnitKind::user ? store.pairs()[p].user_id : store.pairs()[p].listing_id;
      bookings[row_of(id)] += 1;
    }
  }

  std::vector<double> utility(n, 0.0);
  for (const auto& r : records) {
    const std::string* id = unit_of(r, unit);
    if (!id) continue;
    auto it = std::lower_bound(table.unit_ids.begin(), table.unit_ids.end(), *id);
    if (it == table.unit_ids.end() || *it != *id) continue;
    utility[static_cast<std::size_t>(it - table.unit_ids.begin())] += r.utility;
  }

  auto indicator = [](const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0 ? 1.0 : 0.0;
    return out;
  };
  table.add_column("page_views", page_views);
  if (unit == UnitKind::user) {
    table.add_column("page_viewers", indicator(page_views));
    table.add_column("dated_page_viewers", indicator(dated_views));
    table.add_column("bookings", bookings);
    table.add_column("bookers", indicator(bookings));
  } else if (unit == UnitKind::search) {
    table.add_column("booked_clicks", booked_clicks);
  } else {
    table.add_column("bookings", bookings);
  }
  for (double cap : options.caps) {
    std::vector<double> capped(n);
    for (std::size_t i = 0; i < n; ++i) capped[i] = std::min(utility[i], cap);
    table.add_column(capped_column_name(cap), std::move(capped));
  }
  table.add_column("utility", std::move(utility));
  return table;
}

MetricTable utility_metric_per_unit(const JourneyStore& store, const SurrogateModel& model, UnitKind unit,
                                    const MetricOptions& options) {
  if (!options.allow_overlap) check_scoring_window(model, store);
  const auto records = attribute_all(model, store);
  MetricTable full = unit_metrics(store, records, unit, options);
  MetricTable out;
  out.unit_kind = full.unit_kind;
  out.unit_ids = full.unit_ids;
  out.add_column("utility", full.column("utility"));
  for (double cap : options.caps) out.add_column(capped_column_name(cap), full.column(capped_column_name(cap)));
  return out;
}

void write_utility_csv(std::ostream& out, std::span<const UtilityRecord> records) {
  out << "event_id,user_id,listing_id,search_id,t,v_prev,v_curr,utility\n";
  for (const auto& r : records) {
    out << r.event_id << ',' << r.user_id << ',' << r.listing_id << ',' << (r.search_id ? *r.search_id : "")
        << ',' << r.step << ',' << format_double(r.v_prev) << ',' << format_double(r.v_curr) << ','
        << format_double(r.utility) << '\n';
  }
}

void write_aggregated_csv(std::ostream& out, UnitKind unit, std::span<const double> caps,
                          std::span<const UtilityRecord> records) {
  if (caps.empty()) fail(ErrorKind::invalid_argument, "at least one cap is required");
  std::vector<Aggregation> aggs;
  for (double c : caps) aggs.push_back(aggregate(records, unit, c));
  out << "unit_kind,unit_id,raw";
  if (caps.size() == 1) {
    out << ",capped";
  } else {
    for (double c : caps) out << ",capped_" << format_double(c);
  }
  out << '\n';
  const auto kind = to_string(unit);
  for (const auto& [id, first] : aggs.front().units) {
    out << kind << ',' << id << ',' << format_double(first.raw_sum);
    for (const auto& a : aggs) out << ',' << format_double(a.units.at(id).capped);
    out << '\n';
  }
}

}  // namespace surrogate
