#include "surrogate/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "surrogate/error.hpp"
#include "surrogate/io.hpp"
#include "surrogate/loss.hpp"

namespace surrogate {

namespace {

// Stream tags keep the listing catalogue, logged users, the ATE oracle and
// interleaving queries on disjoint substreams.
constexpr std::uint64_t kListingStream = 0x6c697374696e6773ULL;
constexpr std::uint64_t kUserStream = 0x7573657273000000ULL;
constexpr std::uint64_t kOracleStream = 0x6f7261636c650000ULL;
constexpr std::uint64_t kQueryStream = 0x7175657279000000ULL;
constexpr std::uint64_t kDraftStream = 0x6472616674000000ULL;

constexpr TimestampMs kClickSpacingMs = 20'000;
constexpr TimestampMs kMinSearchGapMs = 3'600'000;
constexpr TimestampMs kBookingDelayMs = 600'000;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return std::mt19937_64(splitmix(splitmix(seed ^ tag) + index));
}

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double normal(std::mt19937_64& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

std::int64_t poisson(std::mt19937_64& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<std::int64_t>(mean)(rng);
}

bool bernoulli(std::mt19937_64& rng, double p) { return uniform(rng) < p; }

struct World {
  std::vector<ListingAttributes> listings;
  std::vector<double> price_penalty;  // standardised log price
  std::vector<std::vector<std::uint32_t>> by_location;
};

World make_world(const SimConfig& cfg) {
  World w;
  auto rng = substream(cfg.seed, kListingStream, 0);
  w.listings.resize(cfg.n_listings);
  w.price_penalty.resize(cfg.n_listings);
  w.by_location.resize(cfg.n_locations);
  const double log_mu = std::log(120.0), log_sd = 0.5;
  for (std::size_t i = 0; i < cfg.n_listings; ++i) {
    auto& l = w.listings[i];
    l.listing_id = "l" + std::to_string(i);
    const double z = normal(rng);
    l.price_per_night = std::max(10.0, std::round(std::exp(log_mu + log_sd * z) * 100.0) / 100.0);
    w.price_penalty[i] = (std::log(l.price_per_night) - log_mu) / log_sd;
    l.review_score = std::round((3.5 + 1.5 * uniform(rng)) * 100.0) / 100.0;
    l.review_count = poisson(rng, 40.0);
    l.availability_days = static_cast<std::int64_t>(rng() % 366);
    l.past_bookings = poisson(rng, 0.5 * static_cast<double>(l.review_count) + 1.0);
    l.location_bucket = static_cast<std::int64_t>(i % cfg.n_locations);
    w.by_location[i % cfg.n_locations].push_back(static_cast<std::uint32_t>(i));
  }
  return w;
}

struct RawView {
  std::uint32_t slot = 0;    // index into the consideration set
  std::int32_t search = -1;  // -1 for views outside a search
  TimestampMs ts = 0;
  EngagementSignals engagement;
};

struct Journey {
  std::vector<std::uint32_t> listings;  // consideration set
  std::vector<double> relevance;
  std::vector<double> distance_penalty;
  TripContext trip;
  std::vector<RawView> views;
  std::vector<TimestampMs> search_ts;
  std::vector<std::int32_t> search_cell;  // grid cell per search, -1 = holdout
  bool treated = false;
};

struct PairResult {
  std::uint32_t slot = 0;
  double intent_probability = 0.0;
  bool intent = false;
  bool booked = false;
  TimestampMs last_ts = 0;
};

class JourneyGenerator {
 public:
  JourneyGenerator(const SimConfig& cfg, const World& world) : cfg_(cfg), world_(world) {
    state_.listing = ListingAttributes{};
    phi_.resize(kFeatureCount);
  }

  // Consideration set, latent relevance and trip for a fresh user.
  void start(std::mt19937_64& rng, Journey& j) const {
    const auto& pool = world_.by_location[rng() % world_.by_location.size()];
    const std::size_t m = std::min(cfg_.consideration_set, pool.size());
    std::vector<std::uint32_t> picked;
    picked.reserve(m);
    // Floyd's sampling keeps the draw count fixed at m.
    for (std::size_t k = pool.size() - m; k < pool.size(); ++k) {
      const std::size_t t = rng() % (k + 1);
      const auto cand = pool[t];
      if (std::find(picked.begin(), picked.end(), cand) == picked.end()) {
        picked.push_back(cand);
      } else {
        picked.push_back(pool[k]);
      }
    }
    std::sort(picked.begin(), picked.end());
    j.listings = std::move(picked);
    j.relevance.resize(m);
    j.distance_penalty.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      j.relevance[i] = normal(rng);
      j.distance_penalty[i] = normal(rng);
    }
    j.trip = TripContext{};
    j.trip.num_guests = 1 + static_cast<std::int64_t>(rng() % 4);
    if (bernoulli(rng, cfg_.dated_share)) {
      const auto first = date_of(cfg_.start_ms) + std::chrono::days{cfg_.horizon_days};
      const auto checkin = first + std::chrono::days{static_cast<int>(rng() % 61)};
      j.trip.checkin = checkin;
      j.trip.checkout = checkin + std::chrono::days{1 + static_cast<int>(rng() % 7)};
    }
    j.views.clear();
    j.search_ts.clear();
    j.search_cell.clear();
  }

  EngagementSignals engagement(std::mt19937_64& rng, double arm_multiplier, double relevance, std::size_t view_index,
                               double focus_boost) const {
    const auto& r = cfg_.base_engagement_rates;
    const auto& prof = cfg_.depth_profile;
    const double rel = std::exp(cfg_.relevance_engagement * relevance);
    const double depth = prof[std::min(view_index - 1, prof.size() - 1)] * focus_boost;
    const double shallow = arm_multiplier * rel;
    const double deep = shallow * depth;
    EngagementSignals e;
    e.photos_viewed = poisson(rng, r[0] * shallow);
    e.reviews_viewed = poisson(rng, r[1] * deep);
    e.amenities_viewed = poisson(rng, r[2] * deep);
    e.calendar_checked = poisson(rng, r[3] * deep);
    e.host_contacted = bernoulli(rng, std::min(1.0, r[4] * deep)) ? 1 : 0;
    e.reserve_clicked = bernoulli(rng, std::min(1.0, r[5] * deep)) ? 1 : 0;
    const double mean_dwell = cfg_.base_dwell_seconds * std::sqrt(deep);
    e.dwell_seconds = std::round(std::exponential_distribution<double>(1.0 / mean_dwell)(rng) * 10.0) / 10.0;
    return e;
  }

  double click_probability(std::size_t rank, double relevance) const {
    const double pos = 1.0 / (1.0 + cfg_.position_decay * static_cast<double>(rank));
    return std::min(0.95, cfg_.click_base * pos * std::exp(cfg_.relevance_click * relevance));
  }

  // Searches over the horizon. cell_of(rng) picks each search's (alpha, beta)
  // and returns its grid cell.
  template <class CellFn>
  void browse(std::mt19937_64& rng, Journey& j, double arm_multiplier, CellFn&& cell_of) const {
    const std::size_t n_search = 1 + static_cast<std::size_t>(poisson(rng, std::max(0.0, cfg_.searches_per_user - 1.0)));
    const TimestampMs span = static_cast<TimestampMs>(cfg_.horizon_days) * kMsPerDay;
    std::vector<TimestampMs> times(n_search);
    for (auto& t : times) t = cfg_.start_ms + static_cast<TimestampMs>(uniform(rng) * static_cast<double>(span));
    std::sort(times.begin(), times.end());
    for (std::size_t s = 1; s < n_search; ++s) times[s] = std::max(times[s], times[s - 1] + kMinSearchGapMs);

    const std::size_t m = j.listings.size();
    const TimestampMs journey_end = cfg_.start_ms + span;
    std::size_t focus = m;
    if ((cfg_.focus_depth_days > 0 || cfg_.focus_view_days > 0) && m > 0) {
      focus = static_cast<std::size_t>(rng() % m);
    }
    std::vector<std::size_t> views_of(m, 0);
    std::vector<char> closed(m, 0);
    std::vector<double> score(m);
    std::vector<std::uint32_t> order(m);

    for (std::size_t s = 0; s < n_search; ++s) {
      const auto [alpha, beta, cell] = cell_of(rng);
      j.search_ts.push_back(times[s]);
      j.search_cell.push_back(cell);
      const double days_left = static_cast<double>(journey_end - times[s]) / static_cast<double>(kMsPerDay);
      const bool view_ramp = focus < m && days_left <= cfg_.focus_view_days;
      const bool depth_ramp = focus < m && days_left <= cfg_.focus_depth_days;
      for (std::size_t i = 0; i < m; ++i) {
        score[i] = j.relevance[i] - alpha * world_.price_penalty[j.listings[i]] - beta * j.distance_penalty[i] +
                   cfg_.search_noise * normal(rng);
      }
      std::iota(order.begin(), order.end(), 0u);
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return score[a] > score[b] || (score[a] == score[b] && a < b); });
      std::size_t shown = std::min(cfg_.results_per_search, m);
      if (view_ramp) {
        // The favourite is pinned to the top of late searches.
        auto it = std::find(order.begin(), order.end(), static_cast<std::uint32_t>(focus));
        std::rotate(order.begin(), it, it + 1);
      }
      TimestampMs ts = times[s];
      for (std::size_t rank = 0; rank < shown; ++rank) {
        const auto slot = order[rank];
        const bool pinned = view_ramp && slot == focus;
        const double p = pinned ? 0.95 : click_probability(rank, j.relevance[slot]);
        if (!bernoulli(rng, p) || closed[slot]) continue;
        // A pinned favourite is revisited within the search.
        const auto visits = pinned ? 1 + poisson(rng, std::max(0.0, cfg_.focus_view_boost - 1.0)) : 1;
        const double boost = depth_ramp && slot == focus ? cfg_.focus_depth_boost : 1.0;
        for (std::int64_t k = 0; k < visits && !closed[slot]; ++k) {
          ts += kClickSpacingMs;
          RawView v;
          v.slot = slot;
          v.search = static_cast<std::int32_t>(s);
          v.ts = ts;
          v.engagement = engagement(rng, arm_multiplier, j.relevance[slot], ++views_of[slot], boost);
          if (v.engagement.reserve_clicked > 0) closed[slot] = 1;
          j.views.push_back(v);
        }
      }
    }
  }

  // Final windowed state of every viewed pair, intent and dropout draws in
  // consideration-set order.
  void settle(std::mt19937_64& rng, const Journey& j, std::vector<PairResult>& out) {
    out.clear();
    const std::size_t m = j.listings.size();
    std::vector<TimestampMs> last(m, -1);
    for (const auto& v : j.views) last[v.slot] = std::max(last[v.slot], v.ts);
    for (std::uint32_t slot = 0; slot < m; ++slot) {
      if (last[slot] < 0) continue;
      EngagementSignals sum;
      std::size_t count = 0;
      for (const auto& v : j.views) {
        if (v.slot != slot || v.ts < last[slot] - cfg_.lookback_ms) continue;
        sum += v.engagement;
        ++count;
      }
      state_.cumulative = sum;
      state_.view_count = count;
      state_.window_end = last[slot];
      *state_.listing = world_.listings[j.listings[slot]];
      state_.trip = j.trip;
      encode_features(state_, phi_);
      PairResult r;
      r.slot = slot;
      r.last_ts = last[slot];
      r.intent_probability = intent_probability(phi_);
      r.intent = bernoulli(rng, r.intent_probability);
      const bool stays = uniform(rng) >= cfg_.exogenous_dropout;
      r.booked = r.intent && stays;
      out.push_back(r);
    }
  }

  double intent_probability(const FeatureVector& phi) const {
    double z = cfg_.propensity_intercept;
    for (std::size_t k = 0; k < kFeatureCount; ++k) z += cfg_.propensity_weights[k] * phi[k];
    return sigmoid(z);
  }

 private:
  const SimConfig& cfg_;
  const World& world_;
  EpisodeState state_;
  FeatureVector phi_;
};

struct CellChoice {
  double alpha;
  double beta;
  std::int32_t cell;
};

std::string user_id_of(const SimConfig& cfg, std::size_t u) { return cfg.id_prefix + "u" + std::to_string(u); }

void emit(const SimConfig& cfg, const World& world, const Journey& j, const std::vector<PairResult>& pairs,
          const std::string& user, const std::optional<std::string>& user_arm,
          const std::vector<std::string>* cell_names, SimOutput& out) {
  std::vector<std::string> search_ids(j.search_ts.size());
  for (std::size_t s = 0; s < search_ids.size(); ++s) {
    search_ids[s] = user + "s" + std::to_string(s);
    if (cell_names) {
      const auto c = j.search_cell[s];
      out.assignment[search_ids[s]] = c < 0 ? std::string("holdout") : (*cell_names)[static_cast<std::size_t>(c)];
    }
  }
  out.search_count += search_ids.size();
  std::size_t k = 0;
  for (const auto& v : j.views) {
    InteractionEvent e;
    e.event_id = user + "e" + std::to_string(k++);
    e.timestamp_ms = v.ts;
    e.user_id = user;
    e.listing_id = world.listings[j.listings[v.slot]].listing_id;
    if (v.search >= 0) e.search_id = search_ids[static_cast<std::size_t>(v.search)];
    if (cell_names) {
      if (v.search >= 0) e.arm = out.assignment[*e.search_id];
    } else {
      e.arm = user_arm;
    }
    e.engagement = v.engagement;
    e.trip = j.trip;
    out.events.push_back(std::move(e));
  }
  for (const auto& p : pairs) {
    const auto& lid = world.listings[j.listings[p.slot]].listing_id;
    if (p.booked) out.outcomes.push_back(BookingOutcome{user, lid, p.last_ts + kBookingDelayMs, 1});
    out.truth.pairs.push_back(
        PairTruth{user, lid, (1.0 - cfg.exogenous_dropout) * p.intent_probability, p.intent, p.booked});
  }
  out.pair_count += pairs.size();
}

GroundTruth base_truth(const SimConfig& cfg) {
  GroundTruth t;
  t.intercept = cfg.propensity_intercept;
  t.weights = cfg.propensity_weights;
  t.dropout = cfg.exogenous_dropout;
  return t;
}

}  // namespace

std::vector<double> SimConfig::default_propensity_weights() {
  std::vector<double> w(kFeatureCount, 0.0);
  w[0] = 0.01;    // photos
  w[1] = 0.08;    // reviews
  w[2] = 0.08;    // amenities
  w[3] = 0.2;     // calendar
  w[4] = 0.6;     // host contact
  w[5] = 0.9;     // reserve click
  w[6] = 0.002;   // dwell seconds
  w[7] = 0.05;    // view count
  w[8] = -0.002;  // price
  w[9] = 0.2;     // review score
  w[15] = 0.4;    // dated trip
  w[17] = -0.005; // lead time
  return w;
}

void SimConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::config, m); };
  if (n_listings == 0) bad("n_listings must be positive");
  if (n_locations == 0 || n_locations > n_listings) bad("n_locations must be in [1, n_listings]");
  if (horizon_days <= 0) bad("horizon_days must be positive");
  if (lookback_ms <= 0) bad("lookback must be positive");
  if (searches_per_user < 1.0) bad("searches_per_user must be >= 1");
  if (consideration_set == 0 || results_per_search == 0) bad("consideration_set and results_per_search must be positive");
  for (double r : base_engagement_rates) {
    if (!(r > 0.0) || !std::isfinite(r)) bad("base_engagement_rates must be positive");
  }
  if (base_engagement_rates[4] > 1.0 || base_engagement_rates[5] > 1.0) bad("flag rates must be probabilities");
  if (!(base_dwell_seconds > 0.0)) bad("base_dwell_seconds must be positive");
  if (depth_profile.empty()) bad("depth_profile must not be empty");
  for (double d : depth_profile) {
    if (!(d > 0.0)) bad("depth_profile entries must be positive");
  }
  if (!(treatment_effect > 0.0)) bad("treatment_effect must be positive");
  if (!(treatment_share >= 0.0 && treatment_share <= 1.0)) bad("treatment_share must be in [0, 1]");
  if (propensity_weights.size() != kFeatureCount) {
    bad("propensity_weights needs " + std::to_string(kFeatureCount) + " entries");
  }
  if (!(exogenous_dropout >= 0.0 && exogenous_dropout <= 1.0)) bad("exogenous_dropout must be in [0, 1]");
  if (alpha_grid.empty() || beta_grid.empty()) bad("alpha_grid and beta_grid need at least one value");
  if (!(click_base > 0.0) || !(position_decay >= 0.0)) bad("click parameters out of range");
  if (!(dated_share >= 0.0 && dated_share <= 1.0)) bad("dated_share must be in [0, 1]");
  if (focus_depth_days < 0 || focus_view_days < 0) bad("focus ramp days must be nonnegative");
}

double GroundTruth::intent_probability(const FeatureVector& phi) const {
  if (phi.size() != weights.size()) fail(ErrorKind::invalid_argument, "feature vector length mismatch");
  double z = intercept;
  for (std::size_t k = 0; k < weights.size(); ++k) z += weights[k] * phi[k];
  return sigmoid(z);
}

double GroundTruth::booking_probability(const FeatureVector& phi) const {
  return (1.0 - dropout) * intent_probability(phi);
}

std::string grid_cell_id(std::size_t alpha_index, std::size_t beta_index) {
  return "a" + std::to_string(alpha_index) + "b" + std::to_string(beta_index);
}

SimConfig cohort_scenario(SimConfig base) {
  base.depth_profile = {0.2, 0.4, 3.0, 0.3, 0.2, 0.2};
  return base;
}

SimConfig concentration_scenario(SimConfig base) {
  base.horizon_days = 28;
  base.searches_per_user = 8.0;
  base.consideration_set = 40;
  base.results_per_search = 20;
  base.click_base = 0.4;
  base.position_decay = 0.05;
  base.relevance_click = 0.2;
  base.propensity_intercept = -9.5;
  base.focus_depth_days = 6;
  base.focus_view_days = 3;
  base.focus_depth_boost = 10.0;
  base.focus_view_boost = 4.0;
  base.treatment_share = 0.0;
  return base;
}

SimOutput simulate(const SimConfig& config) {
  config.validate();
  const World world = make_world(config);
  JourneyGenerator gen(config, world);
  SimOutput out;
  out.listings = world.listings;
  out.truth = base_truth(config);
  Journey j;
  std::vector<PairResult> pairs;
  for (std::size_t u = 0; u < config.n_users; ++u) {
    auto rng = substream(config.seed, kUserStream, u);
    const bool treated = uniform(rng) < config.treatment_share;
    const std::string arm = treated ? "treatment" : "control";
    gen.start(rng, j);
    gen.browse(rng, j, treated ? config.treatment_effect : 1.0,
               [&](std::mt19937_64&) { return CellChoice{config.alpha, config.beta, 0}; });
    gen.settle(rng, j, pairs);
    const auto user = user_id_of(config, u);
    out.users.push_back(user);
    out.assignment[user] = arm;
    emit(config, world, j, pairs, user, arm, nullptr, out);
  }
  return out;
}

SimOutput run_grid(const SimConfig& config, const GridSplit& split) {
  config.validate();
  const std::size_t na = config.alpha_grid.size(), nb = config.beta_grid.size();
  if (split.cell_share.size() != na * nb) {
    fail(ErrorKind::config, "cell_share needs one entry per grid cell (" + std::to_string(na * nb) + ")");
  }
  double total = 0.0;
  for (double s : split.cell_share) {
    if (!(s >= 0.0)) fail(ErrorKind::config, "cell shares must be nonnegative");
    total += s;
  }
  if (total > 1.0 + 1e-9) fail(ErrorKind::config, "cell shares sum to more than 1");

  std::vector<std::string> names;
  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t b = 0; b < nb; ++b) names.push_back(grid_cell_id(a, b));
  }
  std::vector<double> cumulative(split.cell_share.size());
  std::partial_sum(split.cell_share.begin(), split.cell_share.end(), cumulative.begin());

  const World world = make_world(config);
  JourneyGenerator gen(config, world);
  SimOutput out;
  out.listings = world.listings;
  out.truth = base_truth(config);
  Journey j;
  std::vector<PairResult> pairs;
  auto pick = [&](std::mt19937_64& rng) {
    const double u = uniform(rng);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) return CellChoice{config.alpha, config.beta, -1};
    const auto c = static_cast<std::size_t>(it - cumulative.begin());
    return CellChoice{config.alpha_grid[c / nb], config.beta_grid[c % nb], static_cast<std::int32_t>(c)};
  };
  for (std::size_t u = 0; u < config.n_users; ++u) {
    auto rng = substream(config.seed, kUserStream, u);
    gen.start(rng, j);
    gen.browse(rng, j, 1.0, pick);
    gen.settle(rng, j, pairs);
    const auto user = user_id_of(config, u);
    out.users.push_back(user);
    emit(config, world, j, pairs, user, std::nullopt, &names, out);
  }
  return out;
}

TrueEffect true_ate(const SimConfig& config, std::size_t n_mc, double treatment_multiplier,
                    double control_multiplier) {
  config.validate();
  if (n_mc < 10'000) fail(ErrorKind::invalid_argument, "true_ate needs n_mc >= 10000");
  const World world = make_world(config);
  JourneyGenerator gen(config, world);
  Journey j;
  std::vector<PairResult> pairs;
  const auto fixed = [&](std::mt19937_64&) { return CellChoice{config.alpha, config.beta, 0}; };

  // Expected bookings of a user are the summed pair probabilities, which is
  // the conditional mean of the booking count given the journey.
  auto expected = [&](std::size_t u, double multiplier) {
    auto rng = substream(config.seed, kOracleStream, u);
    gen.start(rng, j);
    gen.browse(rng, j, multiplier, fixed);
    gen.settle(rng, j, pairs);
    double sum = 0.0;
    for (const auto& p : pairs) sum += (1.0 - config.exogenous_dropout) * p.intent_probability;
    return sum;
  };

  double st = 0, sc = 0, stt = 0, scc = 0, sd = 0, sdd = 0;
  for (std::size_t u = 0; u < n_mc; ++u) {
    const double t = expected(u, treatment_multiplier);
    const double c = expected(u, control_multiplier);
    st += t;
    sc += c;
    stt += t * t;
    scc += c * c;
    sd += t - c;
    sdd += (t - c) * (t - c);
  }
  const double n = static_cast<double>(n_mc);
  TrueEffect r;
  r.n_mc = n_mc;
  r.mean_treatment = st / n;
  r.mean_control = sc / n;
  r.ate = sd / n;
  const double var_d = (sdd - sd * sd / n) / (n - 1.0);
  r.ate_se = std::sqrt(var_d / n);
  r.lift = r.mean_treatment / r.mean_control - 1.0;
  // Paired delta method for the ratio of means.
  const double var_t = (stt - st * st / n) / (n - 1.0);
  const double var_c = (scc - sc * sc / n) / (n - 1.0);
  const double cov = (var_t + var_c - var_d) / 2.0;
  const double ratio = r.mean_treatment / r.mean_control;
  const double g = (var_t - 2.0 * ratio * cov + ratio * ratio * var_c) / (r.mean_control * r.mean_control);
  r.lift_se = std::sqrt(std::max(0.0, g) / n);
  return r;
}

std::string truth_json(const SimConfig& config, const SimOutput& out) {
  nlohmann::ordered_json j;
  j["seed"] = config.seed;
  j["n_users"] = config.n_users;
  j["n_listings"] = config.n_listings;
  j["propensity_intercept"] = out.truth.intercept;
  nlohmann::ordered_json w = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < kFeatureCount; ++k) w[std::string(kFeatureNames[k])] = out.truth.weights[k];
  j["propensity_weights"] = w;
  j["exogenous_dropout"] = out.truth.dropout;
  j["treatment_effect"] = config.treatment_effect;
  j["pairs"] = out.pair_count;
  j["searches"] = out.search_count;
  j["events"] = out.events.size();
  j["bookings"] = out.outcomes.size();
  std::size_t intents = 0;
  double expected = 0.0;
  for (const auto& p : out.truth.pairs) {
    intents += p.intent ? 1 : 0;
    expected += p.booking_probability;
  }
  j["intents"] = intents;
  j["expected_bookings"] = expected;
  if (out.truth.effect) {
    const auto& e = *out.truth.effect;
    j["true_effect"] = {{"n_mc", e.n_mc},          {"mean_control", e.mean_control}, {"mean_treatment", e.mean_treatment},
                        {"ate", e.ate},            {"ate_se", e.ate_se},             {"lift", e.lift},
                        {"lift_se", e.lift_se}};
  }
  return j.dump(1) + "\n";
}

namespace {

struct QueryJourney {
  Journey journey;
  std::vector<std::string> list_a, list_b;
};

std::vector<std::uint32_t> rank_slots(const SimConfig& cfg, const World& world, const Journey& j,
                                      const RankerSpec& r, const std::vector<double>& noise) {
  const std::size_t m = j.listings.size();
  std::vector<double> score(m);
  for (std::size_t i = 0; i < m; ++i) {
    score[i] = r.relevance_weight * j.relevance[i] - r.alpha * world.price_penalty[j.listings[i]] -
               r.beta * j.distance_penalty[i] + noise[i];
  }
  std::vector<std::uint32_t> order(m);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return score[a] > score[b] || (score[a] == score[b] && a < b); });
  order.resize(std::min(cfg.results_per_search, m));
  return order;
}

// Scans a fixed result list `passes` times, then revisits some clicked
// listings off-list. Returns the views in time order.
void browse_list(const SimConfig& cfg, const JourneyGenerator& gen, std::mt19937_64& rng, Journey& j,
                 const std::vector<std::uint32_t>& shown, const InterleavingSimOptions& opt) {
  const std::size_t passes = 1 + static_cast<std::size_t>(poisson(rng, std::max(0.0, opt.passes_mean - 1.0)));
  std::vector<std::size_t> views_of(j.listings.size(), 0);
  std::vector<char> closed(j.listings.size(), 0);
  TimestampMs ts = cfg.start_ms;
  j.search_ts.push_back(ts);
  j.search_cell.push_back(0);
  auto view = [&](std::uint32_t slot, std::int32_t search) {
    ts += kClickSpacingMs;
    RawView v;
    v.slot = slot;
    v.search = search;
    v.ts = ts;
    v.engagement = gen.engagement(rng, 1.0, j.relevance[slot], ++views_of[slot], 1.0);
    if (v.engagement.reserve_clicked > 0) closed[slot] = 1;
    j.views.push_back(v);
  };
  for (std::size_t p = 0; p < passes; ++p) {
    for (std::size_t rank = 0; rank < shown.size(); ++rank) {
      const auto slot = shown[rank];
      if (bernoulli(rng, gen.click_probability(rank, j.relevance[slot])) && !closed[slot]) view(slot, 0);
    }
    ts += kMinSearchGapMs;
  }
  std::vector<std::uint32_t> clicked;
  for (const auto& v : j.views) {
    if (std::find(clicked.begin(), clicked.end(), v.slot) == clicked.end()) clicked.push_back(v.slot);
  }
  for (auto slot : clicked) {
    if (bernoulli(rng, opt.outside_view_rate) && !closed[slot]) view(slot, -1);
  }
}

}  // namespace

InterleavingRun simulate_interleaving(const SimConfig& config, const RankerSpec& ranker_a, const RankerSpec& ranker_b,
                                      const InterleavingSimOptions& options) {
  config.validate();
  const World world = make_world(config);
  JourneyGenerator gen(config, world);
  InterleavingRun run;
  run.listings = world.listings;
  Journey j;
  std::vector<PairResult> pairs;
  std::vector<double> noise;
  for (std::size_t q = 0; q < options.queries; ++q) {
    auto rng = substream(config.seed, kQueryStream, q);
    gen.start(rng, j);
    noise.resize(j.listings.size());
    for (auto& x : noise) x = config.search_noise * normal(rng);
    const auto slots_a = rank_slots(config, world, j, ranker_a, noise);
    const auto slots_b = rank_slots(config, world, j, ranker_b, noise);
    auto ids = [&](const std::vector<std::uint32_t>& slots) {
      std::vector<std::string> out;
      for (auto s : slots) out.push_back(world.listings[j.listings[s]].listing_id);
      return out;
    };
    QuerySession session;
    session.query_id = config.id_prefix + "q" + std::to_string(q);
    const auto list_a = ids(slots_a), list_b = ids(slots_b);
    session.list = team_draft(list_a, list_b, config.results_per_search,
                              splitmix(splitmix(config.seed ^ kDraftStream) + q));
    std::vector<std::uint32_t> shown;
    for (const auto& item : session.list.items) {
      const auto pos = std::find(list_a.begin(), list_a.end(), item.listing_id);
      shown.push_back(pos != list_a.end() ? slots_a[static_cast<std::size_t>(pos - list_a.begin())]
                                          : slots_b[static_cast<std::size_t>(
                                                std::find(list_b.begin(), list_b.end(), item.listing_id) -
                                                list_b.begin())]);
    }
    browse_list(config, gen, rng, j, shown, options);
    gen.settle(rng, j, pairs);

    const std::string user = session.query_id;
    std::size_t k = 0;
    for (const auto& v : j.views) {
      InteractionEvent e;
      e.event_id = user + "e" + std::to_string(k++);
      e.timestamp_ms = v.ts;
      e.user_id = user;
      e.listing_id = world.listings[j.listings[v.slot]].listing_id;
      if (v.search >= 0) e.search_id = user;
      e.engagement = v.engagement;
      e.trip = j.trip;
      session.views.push_back(SessionView{e.event_id, e.listing_id, e.timestamp_ms, v.search >= 0});
      run.events.push_back(std::move(e));
    }
    TimestampMs first_booking = 0;
    for (const auto& p : pairs) {
      if (!p.booked) continue;
      const auto& lid = world.listings[j.listings[p.slot]].listing_id;
      const TimestampMs bts = p.last_ts + kBookingDelayMs;
      run.outcomes.push_back(BookingOutcome{user, lid, bts, 1});
      if (!session.booked_listing || bts < first_booking) {
        session.booked_listing = lid;
        first_booking = bts;
      }
    }
    run.lists_a.push_back(list_a);
    run.lists_b.push_back(list_b);
    run.sessions.push_back(std::move(session));
  }
  return run;
}

double ranker_expected_bookings(const SimConfig& config, const RankerSpec& ranker, std::size_t n_mc) {
  config.validate();
  if (n_mc == 0) fail(ErrorKind::invalid_argument, "n_mc must be positive");
  const World world = make_world(config);
  JourneyGenerator gen(config, world);
  InterleavingSimOptions opt;
  opt.outside_view_rate = 0.0;
  Journey j;
  std::vector<PairResult> pairs;
  std::vector<double> noise;
  double total = 0.0;
  for (std::size_t q = 0; q < n_mc; ++q) {
    auto rng = substream(config.seed, kOracleStream, q);
    gen.start(rng, j);
    noise.resize(j.listings.size());
    for (auto& x : noise) x = config.search_noise * normal(rng);
    browse_list(config, gen, rng, j, rank_slots(config, world, j, ranker, noise), opt);
    gen.settle(rng, j, pairs);
    for (const auto& p : pairs) total += (1.0 - config.exogenous_dropout) * p.intent_probability;
  }
  return total / static_cast<double>(n_mc);
}

}  // namespace surrogate
