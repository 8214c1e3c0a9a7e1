#pragma once

// Independent reference implementations used as test oracles. They favour
// obviousness over speed and share no code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "surrogate/types.hpp"

namespace oracle {

using surrogate::EngagementSignals;
using surrogate::InteractionEvent;
using surrogate::TimestampMs;

struct ScanState {
  EngagementSignals sum;
  std::size_t view_count = 0;
  TimestampMs window_start = 0;
  TimestampMs window_end = 0;
};

// Re-scans the raw log for the t-th view (1-based) of a pair.
inline ScanState brute_force_state(const std::vector<InteractionEvent>& log, const std::string& user,
                                   const std::string& listing, std::size_t t, TimestampMs lookback,
                                   bool exclude_post_reserve = true) {
  std::vector<InteractionEvent> views;
  std::set<std::string> seen;
  for (const auto& e : log) {
    if (e.user_id == user && e.listing_id == listing && seen.insert(e.event_id).second) views.push_back(e);
  }
  std::sort(views.begin(), views.end(), [](const auto& a, const auto& b) {
    return std::tie(a.timestamp_ms, a.event_id) < std::tie(b.timestamp_ms, b.event_id);
  });
  if (exclude_post_reserve) {
    for (std::size_t i = 0; i < views.size(); ++i) {
      if (views[i].engagement.reserve_clicked > 0) {
        views.resize(i + 1);
        break;
      }
    }
  }
  ScanState s;
  const auto& target = views.at(t - 1);
  s.window_end = target.timestamp_ms;
  s.window_start = target.timestamp_ms;
  for (std::size_t i = 0; i < t; ++i) {
    if (views[i].timestamp_ms < target.timestamp_ms - lookback) continue;
    s.window_start = std::min(s.window_start, views[i].timestamp_ms);
    s.sum += views[i].engagement;
    ++s.view_count;
  }
  return s;
}

struct Stump {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = -1.0;
  double left_value = 0.0;
  double right_value = 0.0;
};

// Best depth-1 split from the base-rate margin, tried at every midpoint
// between consecutive distinct values of every feature.
inline Stump exhaustive_stump(const std::vector<std::vector<double>>& x, const std::vector<int>& y, double l2,
                              double eta, std::size_t min_leaf) {
  const double n = static_cast<double>(y.size());
  double pos = 0;
  for (int v : y) pos += v;
  const double p = pos / n;
  std::vector<double> g(y.size()), h(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    g[i] = p - y[i];
    h[i] = p * (1 - p);
  }
  auto score = [&](double G, double H) { return G * G / (H + l2); };
  double G = 0, H = 0;
  for (std::size_t i = 0; i < y.size(); ++i) G += g[i], H += h[i];
  Stump best;
  for (std::size_t f = 0; f < x[0].size(); ++f) {
    std::set<double> values;
    for (const auto& row : x) values.insert(row[f]);
    std::vector<double> v(values.begin(), values.end());
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double thr = v[k] + (v[k + 1] - v[k]) / 2;
      double GL = 0, HL = 0;
      std::size_t nl = 0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (x[i][f] <= thr) GL += g[i], HL += h[i], ++nl;
      }
      if (nl < min_leaf || y.size() - nl < min_leaf) continue;
      const double gain = score(GL, HL) + score(G - GL, H - HL) - score(G, H);
      if (gain > best.gain + 1e-12) {
        best = {f, thr, gain, -GL / (HL + l2) * eta, -(G - GL) / (H - HL + l2) * eta};
      }
    }
  }
  return best;
}

// Every team-draft outcome for two lists, by branching on each round's coin.
// Outcomes are sequences of (id, team) with team 0 = A, 1 = B.
using Draft = std::vector<std::pair<std::string, int>>;

inline void draft_rec(const std::vector<std::string>& a, const std::vector<std::string>& b, std::size_t k,
                      Draft current, std::set<Draft>& out) {
  std::set<std::string> placed;
  for (const auto& [id, team] : current) placed.insert(id);
  std::set<std::string> uni(a.begin(), a.end());
  uni.insert(b.begin(), b.end());
  const std::size_t target = std::min(k, uni.size());
  if (current.size() >= target) {
    out.insert(current);
    return;
  }
  for (int first = 0; first < 2; ++first) {
    Draft d = current;
    std::set<std::string> p = placed;
    for (int turn = 0; turn < 2 && d.size() < target; ++turn) {
      const int team = turn == 0 ? first : 1 - first;
      const auto& list = team == 0 ? a : b;
      for (const auto& id : list) {
        if (!p.count(id)) {
          d.emplace_back(id, team);
          p.insert(id);
          break;
        }
      }
    }
    draft_rec(a, b, k, d, out);
  }
}

inline std::set<Draft> enumerate_drafts(const std::vector<std::string>& a, const std::vector<std::string>& b,
                                        std::size_t k) {
  std::set<Draft> out;
  draft_rec(a, b, k, {}, out);
  return out;
}

// Bootstrap variance of the percent lift, resampling each arm independently.
inline double bootstrap_lift_variance(const std::vector<double>& t, const std::vector<double>& c, int resamples,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> lifts;
  lifts.reserve(static_cast<std::size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    double st = 0, sc = 0;
    for (std::size_t i = 0; i < t.size(); ++i) st += t[rng() % t.size()];
    for (std::size_t i = 0; i < c.size(); ++i) sc += c[rng() % c.size()];
    lifts.push_back((st / static_cast<double>(t.size())) / (sc / static_cast<double>(c.size())) - 1.0);
  }
  double m = 0;
  for (double l : lifts) m += l;
  m /= resamples;
  double v = 0;
  for (double l : lifts) v += (l - m) * (l - m);
  return v / (resamples - 1);
}

// Per-view positive rate straight from the raw logs: a view counts as
// positive when its pair has a booking at or after it within the horizon.
// Views after the booking are not counted at all.
inline double log_scan_positive_rate(const std::vector<InteractionEvent>& events,
                                     const std::vector<surrogate::BookingOutcome>& outcomes, TimestampMs horizon) {
  std::map<std::pair<std::string, std::string>, TimestampMs> booked;
  for (const auto& o : outcomes) {
    if (o.value != 1) continue;
    auto key = std::make_pair(o.user_id, o.listing_id);
    auto it = booked.find(key);
    if (it == booked.end() || o.timestamp_ms < it->second) booked[key] = o.timestamp_ms;
  }
  double pos = 0, total = 0;
  for (const auto& e : events) {
    const auto it = booked.find({e.user_id, e.listing_id});
    if (it != booked.end() && e.timestamp_ms > it->second) continue;
    total += 1;
    if (it != booked.end() && it->second - e.timestamp_ms <= horizon) pos += 1;
  }
  return pos / total;
}

}  // namespace oracle
