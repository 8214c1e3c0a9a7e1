#include "surrogate/experiment_stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string_view>
#include <tuple>

#include "surrogate/error.hpp"

namespace surrogate {

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // sample variance
};

Moments moments(std::span<const double> x) {
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - m.mean) * (v - m.mean);
  m.var = ss / static_cast<double>(x.size() - 1);
  return m;
}

}  // namespace

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

LiftEstimate percent_lift(std::span<const double> treatment, std::span<const double> control, std::string metric) {
  if (treatment.size() < 2 || control.size() < 2)
    fail(ErrorKind::invalid_argument, "percent lift needs at least 2 units per group");
  const auto t = moments(treatment);
  const auto c = moments(control);
  if (c.mean == 0.0) fail(ErrorKind::data, "undefined percent lift: control mean is 0");

  LiftEstimate est;
  est.metric = std::move(metric);
  est.n_t = treatment.size();
  est.n_c = control.size();
  est.mean_t = t.mean;
  est.mean_c = c.mean;
  const double ratio = t.mean / c.mean;
  est.lift = ratio - 1.0;
  const double nt = static_cast<double>(est.n_t);
  const double nc = static_cast<double>(est.n_c);
  const double mc2 = c.mean * c.mean;
  // (m_T/m_C)^2 (s_T^2/(n_T m_T^2) + s_C^2/(n_C m_C^2)), expanded to avoid dividing by m_T.
  est.variance = t.var / (nt * mc2) + ratio * ratio * c.var / (nc * mc2);
  const double half = kZ95 * std::sqrt(est.variance);
  est.ci_lo = est.lift - half;
  est.ci_hi = est.lift + half;

  // z on log(1 + lift) keeps the test symmetric under swapping arms and
  // invariant to rescaling; falls back to the difference of means when the
  // ratio is not positive.
  double z;
  if (ratio > 0 && t.mean != 0.0) {
    const double v_log = t.var / (nt * t.mean * t.mean) + c.var / (nc * mc2);
    z = v_log > 0 ? std::log(ratio) / std::sqrt(v_log) : (ratio == 1.0 ? 0.0 : INFINITY);
  } else {
    const double v_diff = t.var / nt + c.var / nc;
    z = v_diff > 0 ? (t.mean - c.mean) / std::sqrt(v_diff) : (t.mean == c.mean ? 0.0 : INFINITY);
  }
  est.p_value = normal_two_sided_p(z);
  return est;
}

std::vector<MetricColumn> columns_of(const MetricTable& table) {
  std::vector<MetricColumn> out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    MetricColumn col{table.columns[c], {}};
    col.values.reserve(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) col.values.emplace_back(table.unit_ids[r], table.values[c][r]);
    out.push_back(std::move(col));
  }
  return out;
}

namespace {

std::string join_limited(const std::vector<std::string>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size() && i < 10; ++i) s += (i ? ", " : "") + ids[i];
  if (ids.size() > 10) s += ", ... (" + std::to_string(ids.size()) + " total)";
  return s;
}

std::pair<std::vector<double>, std::vector<double>> split_by_arm(const MetricColumn& col, const Assignment& assignment,
                                                                 const std::string& treatment_arm,
                                                                 const std::string& control_arm) {
  std::vector<double> t, c;
  std::vector<std::string> unassigned;
  for (const auto& [unit, v] : col.values) {
    auto it = assignment.find(unit);
    if (it == assignment.end()) unassigned.push_back(unit);
    else if (it->second == treatment_arm) t.push_back(v);
    else if (it->second == control_arm) c.push_back(v);
  }
  if (!unassigned.empty())
    fail(ErrorKind::invalid_argument, "units without an arm in column '" + col.name + "': " + join_limited(unassigned));
  return {std::move(t), std::move(c)};
}

}  // namespace

LiftEstimate lift_of(const MetricTable& table, const std::string& column, const Assignment& assignment,
                     const std::string& treatment_arm, const std::string& control_arm) {
  MetricColumn col{column, {}};
  const auto& v = table.column(column);
  for (std::size_t r = 0; r < table.rows(); ++r) col.values.emplace_back(table.unit_ids[r], v[r]);
  auto [t, c] = split_by_arm(col, assignment, treatment_arm, control_arm);
  return percent_lift(t, c, column);
}

std::vector<VarianceRatioRow> variance_ratio_table(std::span<const MetricColumn> columns, const std::string& baseline,
                                                   const Assignment& assignment, const std::string& treatment_arm,
                                                   const std::string& control_arm) {
  auto base_it = std::find_if(columns.begin(), columns.end(), [&](const MetricColumn& c) { return c.name == baseline; });
  if (base_it == columns.end()) fail(ErrorKind::invalid_argument, "baseline metric '" + baseline + "' not present");

  std::set<std::string> roster;
  for (const auto& [unit, v] : base_it->values) roster.insert(unit);
  for (const auto& col : columns) {
    std::set<std::string> units;
    for (const auto& [unit, v] : col.values) units.insert(unit);
    if (units == roster) continue;
    std::vector<std::string> missing;
    std::set_symmetric_difference(roster.begin(), roster.end(), units.begin(), units.end(),
                                  std::back_inserter(missing));
    fail(ErrorKind::invalid_argument,
         "column '" + col.name + "' does not cover the baseline roster; differing units: " + join_limited(missing));
  }

  auto lift_for = [&](const MetricColumn& col) {
    auto [t, c] = split_by_arm(col, assignment, treatment_arm, control_arm);
    return percent_lift(t, c, col.name);
  };
  const auto base = lift_for(*base_it);
  if (!(base.variance > 0)) fail(ErrorKind::data, "baseline metric '" + baseline + "' has zero lift variance");
  std::vector<VarianceRatioRow> rows;
  for (const auto& col : columns) {
    VarianceRatioRow row;
    row.metric = col.name;
    row.lift = &col == &*base_it ? base : lift_for(col);
    row.variance_ratio = &col == &*base_it ? 1.0 : row.lift.variance / base.variance;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

AlignmentReport alignment_analysis(std::span<const ExperimentReadout> experiments) {
  if (experiments.empty()) fail(ErrorKind::invalid_argument, "alignment analysis needs at least one experiment");
  AlignmentReport report;
  report.n_total = experiments.size();
  std::vector<double> outcome, surrogate;
  std::size_t agree = 0;
  auto sign = [](double v) { return (v > 0) - (v < 0); };
  for (const auto& e : experiments) {
    const bool sig = e.outcome_p < kSignificance;
    report.rows.push_back({e, sig});
    if (!sig) continue;
    ++report.n_significant;
    outcome.push_back(e.outcome_lift);
    surrogate.push_back(e.surrogate_lift);
    if (sign(e.outcome_lift) == sign(e.surrogate_lift)) ++agree;
  }
  if (report.n_significant > 0) {
    report.sign_agreement_rate = static_cast<double>(agree) / static_cast<double>(report.n_significant);
    report.pearson_correlation = pearson(surrogate, outcome);
  }
  return report;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) fail(ErrorKind::invalid_argument, "percentile of an empty set");
  if (!(pct >= 0 && pct <= 100)) fail(ErrorKind::invalid_argument, "percentile must be in [0,100]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

CohortCurves utility_by_view_index(std::span<const UtilityRecord> records, std::span<const std::size_t> cohorts,
                                   double pct) {
  if (!(pct > 0 && pct < 100)) fail(ErrorKind::invalid_argument, "percentile must be in (0,100)");
  if (cohorts.empty()) fail(ErrorKind::invalid_argument, "no cohorts requested");
  std::map<std::size_t, std::vector<std::vector<double>>> by_cohort;  // k -> index -> utilities
  std::map<std::size_t, std::size_t> pair_counts;
  for (auto k : cohorts) by_cohort[k].assign(k, {});
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i;
    while (j < records.size() && records[j].user_id == records[i].user_id &&
           records[j].listing_id == records[i].listing_id)
      ++j;
    const std::size_t k = j - i;
    if (auto it = by_cohort.find(k); it != by_cohort.end()) {
      for (std::size_t s = 0; s < k; ++s) it->second[s].push_back(records[i + s].utility);
      ++pair_counts[k];
    }
    i = j;
  }
  CohortCurves out;
  for (auto k : cohorts) {
    if (pair_counts[k] == 0) {
      out.omitted.push_back(k);
      continue;
    }
    CohortCurve curve{k, pair_counts[k], {}};
    for (auto& at_index : by_cohort[k]) curve.values.push_back(percentile(at_index, pct));
    out.curves.push_back(std::move(curve));
  }
  return out;
}

std::vector<UtilityRecord> booked_pair_records(const JourneyStore& store, std::span<const UtilityRecord> records) {
  std::vector<UtilityRecord> out;
  const PairKey* last = nullptr;
  PairKey current;
  std::optional<BookingOutcome> booking;
  for (const auto& r : records) {
    if (!last || r.user_id != current.user_id || r.listing_id != current.listing_id) {
      current = {r.user_id, r.listing_id};
      last = &current;
      booking = store.booking(current);
    }
    if (booking && r.timestamp_ms <= booking->timestamp_ms) out.push_back(r);
  }
  return out;
}

std::vector<ShareDay> utility_share_trend(std::span<const UtilityRecord> records,
                                          std::span<const BookingOutcome> outcomes, int horizon_days) {
  if (horizon_days < 1) fail(ErrorKind::invalid_argument, "horizon must be at least 1 day");
  std::map<std::string, const BookingOutcome*> first_booking;
  for (const auto& o : outcomes) {
    if (o.value != 1) continue;
    auto [it, inserted] = first_booking.try_emplace(o.user_id, &o);
    if (!inserted && std::tie(o.timestamp_ms, o.listing_id) < std::tie(it->second->timestamp_ms, it->second->listing_id))
      it->second = &o;
  }
  std::map<std::string, std::vector<const UtilityRecord*>> by_user;
  for (const auto& r : records)
    if (first_booking.count(r.user_id)) by_user[r.user_id].push_back(&r);

  const auto days = static_cast<std::size_t>(horizon_days) + 1;
  std::vector<double> view_share_sum(days, 0.0), util_share_sum(days, 0.0);
  std::vector<std::size_t> view_users(days, 0), util_users(days, 0);
  for (const auto& [user, recs] : by_user) {
    const auto* booking = first_booking.at(user);
    const auto booking_day = date_of(booking->timestamp_ms);
    std::vector<double> views(days, 0), views_booked(days, 0), util(days, 0), util_booked(days, 0);
    for (const auto* r : recs) {
      if (r->timestamp_ms > booking->timestamp_ms) continue;
      const auto offset = (date_of(r->timestamp_ms) - booking_day).count();
      if (offset < -horizon_days) continue;
      const auto slot = static_cast<std::size_t>(offset + horizon_days);
      const bool on_booked = r->listing_id == booking->listing_id;
      const double pos = std::max(r->utility, 0.0);
      views[slot] += 1;
      util[slot] += pos;
      if (on_booked) {
        views_booked[slot] += 1;
        util_booked[slot] += pos;
      }
    }
    for (std::size_t s = 0; s < days; ++s) {
      if (views[s] > 0) {
        view_share_sum[s] += views_booked[s] / views[s];
        ++view_users[s];
      }
      if (util[s] > 0) {
        util_share_sum[s] += util_booked[s] / util[s];
        ++util_users[s];
      }
    }
  }
  std::vector<ShareDay> out;
  for (std::size_t s = 0; s < days; ++s) {
    ShareDay d;
    d.offset = static_cast<int>(s) - horizon_days;
    d.view_users = view_users[s];
    d.utility_users = util_users[s];
    if (view_users[s]) d.view_share = view_share_sum[s] / static_cast<double>(view_users[s]);
    if (util_users[s]) d.utility_share = util_share_sum[s] / static_cast<double>(util_users[s]);
    out.push_back(d);
  }
  return out;
}

ShareUptick share_uptick(std::span<const ShareDay> days, std::size_t base_days, double factor) {
  if (base_days == 0 || base_days >= days.size()) fail(ErrorKind::invalid_argument, "base_days must be in [1, days)");
  auto scan = [&](auto member, double& base, std::optional<int>& day) {
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < base_days; ++i) {
      if (const auto& v = days[i].*member) sum += *v, ++n;
    }
    if (n == 0) return;
    base = sum / static_cast<double>(n);
    for (std::size_t i = base_days; i < days.size(); ++i) {
      const auto& v = days[i].*member;
      if (v && *v > factor * base) {
        day = days[i].offset;
        return;
      }
    }
  };
  ShareUptick u;
  scan(&ShareDay::view_share, u.view_base, u.view_day);
  scan(&ShareDay::utility_share, u.utility_base, u.utility_day);
  return u;
}

TrendTest linear_trend(std::span<const double> x, std::span<const double> estimate, std::span<const double> variance) {
  const std::size_t n = x.size();
  if (n < 2 || estimate.size() != n || variance.size() != n)
    fail(ErrorKind::invalid_argument, "trend test needs at least 2 matching points");
  double sw = 0, swx = 0, swy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(variance[i] > 0)) fail(ErrorKind::invalid_argument, "trend test needs positive variances");
    const double w = 1.0 / variance[i];
    sw += w;
    swx += w * x[i];
    swy += w * estimate[i];
  }
  const double xbar = swx / sw, ybar = swy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / variance[i];
    sxx += w * (x[i] - xbar) * (x[i] - xbar);
    sxy += w * (x[i] - xbar) * (estimate[i] - ybar);
  }
  if (!(sxx > 0)) fail(ErrorKind::invalid_argument, "trend test needs at least 2 distinct x values");
  TrendTest t;
  t.slope = sxy / sxx;
  t.se = 1.0 / std::sqrt(sxx);
  t.ci_lo = t.slope - kZ95 * t.se;
  t.ci_hi = t.slope + kZ95 * t.se;
  t.p_value = normal_two_sided_p(t.slope / t.se);
  return t;
}

}  // namespace surrogate

namespace surrogate {

std::optional<std::pair<std::size_t, std::size_t>> parse_grid_cell(const std::string& arm) {
  if (arm.size() < 4 || arm[0] != 'a') return std::nullopt;
  const auto b = arm.find('b');
  if (b == std::string::npos || b == 1 || b + 1 == arm.size()) return std::nullopt;
  auto digits = [](std::string_view s) { return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }); };
  const std::string_view sv(arm);
  if (!digits(sv.substr(1, b - 1)) || !digits(sv.substr(b + 1))) return std::nullopt;
  return std::pair{static_cast<std::size_t>(std::stoull(arm.substr(1, b - 1))),
                   static_cast<std::size_t>(std::stoull(arm.substr(b + 1)))};
}

GridTrend grid_alpha_trend(const MetricTable& table, const std::string& metric, const Assignment& assignment,
                           std::span<const double> alpha_grid) {
  const auto& col = table.column(metric);
  std::vector<std::vector<double>> by_alpha(alpha_grid.size());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto it = assignment.find(table.unit_ids[r]);
    if (it == assignment.end()) continue;
    const auto cell = parse_grid_cell(it->second);
    if (!cell || cell->first >= alpha_grid.size()) continue;
    by_alpha[cell->first].push_back(col[r]);
  }
  GridTrend out;
  out.metric = metric;
  std::vector<double> x, m, v;
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    const auto& vals = by_alpha[i];
    if (vals.size() < 2) fail(ErrorKind::invalid_argument, "grid alpha index " + std::to_string(i) + " has fewer than 2 units");
    const double n = static_cast<double>(vals.size());
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n;
    double ss = 0.0;
    for (double y : vals) ss += (y - mean) * (y - mean);
    GridPoint p{alpha_grid[i], mean, ss / (n - 1.0) / n, vals.size()};
    out.points.push_back(p);
    x.push_back(p.alpha);
    m.push_back(p.mean);
    v.push_back(p.variance);
  }
  out.trend = linear_trend(x, m, v);
  return out;
}

}  // namespace surrogate
