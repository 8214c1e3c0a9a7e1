#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "surrogate/error.hpp"
#include "surrogate/learner.hpp"
#include "surrogate/loss.hpp"
#include "surrogate/simulator.hpp"

using namespace surrogate;

namespace {

LabeledSet make_set(std::size_t features) {
  LabeledSet s;
  s.feature_count = features;
  return s;
}

void add(LabeledSet& s, std::vector<double> x, int y) {
  s.rows.push_back(std::move(x));
  s.labels.push_back(y);
  s.timestamps.push_back(static_cast<TimestampMs>(s.rows.size()));
}

// y = 1 iff x0 > 0.5 on a grid of 200 points; x1 is noise.
LabeledSet separable() {
  auto s = make_set(2);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const double x0 = i / 200.0;
    add(s, {x0, static_cast<double>(rng() % 100)}, x0 > 0.5 ? 1 : 0);
  }
  return s;
}

GbdtConfig small_gbdt() {
  GbdtConfig c;
  c.num_trees = 50;
  c.max_depth = 3;
  c.min_samples_leaf = 5;
  c.dropout_rate = 0.0;
  return c;
}

// Logistic-generated data with known weights.
LabeledSet logistic_data(const std::vector<double>& w, double b, std::size_t n, std::uint64_t seed) {
  auto s = make_set(w.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(w.size());
    double score = b;
    for (std::size_t j = 0; j < w.size(); ++j) {
      x[j] = z(rng);
      score += w[j] * x[j];
    }
    add(s, x, u(rng) < sigmoid(score) ? 1 : 0);
  }
  return s;
}

SimOutput sim_data(std::size_t users, std::uint64_t seed) {
  SimConfig c;
  c.n_users = users;
  c.seed = seed;
  c.propensity_intercept = -4.0;
  return simulate(c);
}

}  // namespace

TEST_CASE("gbdt fits a separable set") {
  const auto s = separable();
  const auto m = train_gbdt(s, small_gbdt());
  const auto p = predict_all(m, s);
  CHECK(mean_log_loss(p, s.labels) < 0.05);
  CHECK(rank_auc(p, s.labels) == doctest::Approx(1.0));
}

TEST_CASE("a single stump matches the exhaustive best split") {
  const auto s = logistic_data({1.0, -0.5, 0.2}, -0.3, 400, 7);
  GbdtConfig c;
  c.num_trees = 1;
  c.max_depth = 1;
  c.min_samples_leaf = 10;
  c.dropout_rate = 0.0;
  c.l2_leaf = 1.0;
  c.learning_rate = 0.3;
  const auto m = train_gbdt(s, c);
  const auto ref = oracle::exhaustive_stump(s.rows, s.labels, 1.0, 0.3, 10);
  REQUIRE(m.trees.size() == 1);
  const auto& root = m.trees[0].nodes[0];
  REQUIRE_FALSE(root.is_leaf());
  CHECK(static_cast<std::size_t>(root.feature) == ref.feature);
  CHECK(root.threshold == doctest::Approx(ref.threshold).epsilon(1e-12));
  CHECK(m.trees[0].nodes[root.left].value == doctest::Approx(ref.left_value).epsilon(1e-9));
  CHECK(m.trees[0].nodes[root.right].value == doctest::Approx(ref.right_value).epsilon(1e-9));
}

TEST_CASE("same data and seed give identical predictions") {
  const auto s = logistic_data({0.8, -0.4}, 0.1, 500, 3);
  auto c = small_gbdt();
  c.dropout_rate = 0.2;
  c.subsample = 0.8;
  c.seed = 42;
  const auto a = predict_all(train_gbdt(s, c), s);
  const auto b = predict_all(train_gbdt(s, c), s);
  CHECK(a == b);
}

TEST_CASE("constant features predict the base rate") {
  auto s = make_set(2);
  for (int i = 0; i < 100; ++i) add(s, {1.0, 2.0}, i < 30 ? 1 : 0);
  const auto m = train_gbdt(s, small_gbdt());
  CHECK(m.predict(std::vector<double>{1.0, 2.0}) == doctest::Approx(0.3).epsilon(1e-9));
  const auto l = train_logistic(s, {});
  CHECK(l.predict(std::vector<double>{1.0, 2.0}) == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("single-class training data is rejected") {
  auto s = make_set(1);
  for (int i = 0; i < 10; ++i) add(s, {static_cast<double>(i)}, 0);
  CHECK_THROWS_AS(train_gbdt(s, small_gbdt()), Error);
  CHECK_THROWS_AS(train_logistic(s, {}), Error);
}

TEST_CASE("NaN features are rejected") {
  auto s = separable();
  s.rows[3][0] = std::nan("");
  try {
    train_gbdt(s, small_gbdt());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_argument);
  }
}

TEST_CASE("wrong-length feature vector is rejected at prediction") {
  const auto m = train_gbdt(separable(), small_gbdt());
  CHECK_THROWS_AS(m.predict(std::vector<double>{0.1}), Error);
}

TEST_CASE("huge l2 shrinks logistic weights toward zero") {
  const auto s = logistic_data({1.5, -1.0}, 0.0, 1000, 5);
  LogisticConfig c;
  c.l2 = 1e6;
  const auto m = train_logistic(s, c);
  for (double w : m.weights) CHECK(std::abs(w) < 1e-3);
}

TEST_CASE("logistic regression recovers generating weights") {
  const std::vector<double> w = {1.0, -0.7, 0.3, 0.0};
  const auto s = logistic_data(w, -0.5, 40'000, 11);
  const auto m = train_logistic(s, {});
  for (std::size_t j = 0; j < w.size(); ++j) CHECK(std::abs(m.weights[j] - w[j]) < 0.05);
  CHECK(std::abs(m.bias + 0.5) < 0.05);
}

TEST_CASE("analytic loss gradient and hessian match finite differences") {
  for (double s : {-6.0, -1.3, 0.0, 0.4, 3.2}) {
    for (int y : {0, 1}) {
      const double h = 1e-6;
      const double fd = (logistic_loss(s + h, y) - logistic_loss(s - h, y)) / (2 * h);
      CHECK(logistic_gradient(s, y) == doctest::Approx(fd).epsilon(1e-6));
      const double fd2 = (logistic_gradient(s + h, y) - logistic_gradient(s - h, y)) / (2 * h);
      CHECK(logistic_hessian(s) == doctest::Approx(fd2).epsilon(1e-5));
    }
  }
}

TEST_CASE("sigmoid stays strictly inside the unit interval") {
  for (double s : {-1000.0, -50.0, 0.0, 50.0, 1000.0}) {
    CHECK(sigmoid(s) > 0.0);
    CHECK(sigmoid(s) < 1.0);
  }
}

TEST_CASE("training loss does not increase without dropout") {
  const auto s = logistic_data({0.9, -0.6, 0.2}, -1.0, 2000, 13);
  const auto m = train_gbdt(s, small_gbdt());
  const auto& trace = m.meta.loss_trace;
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
}

TEST_CASE("model json round trip reproduces predictions bit for bit") {
  const auto s = logistic_data({0.9, -0.6}, -0.2, 500, 17);
  auto c = small_gbdt();
  c.dropout_rate = 0.1;
  for (const auto& m : {train_gbdt(s, c), train_logistic(s, {})}) {
    const auto back = SurrogateModel::from_json(m.to_json());
    CHECK(predict_all(back, s) == predict_all(m, s));
    CHECK(back.meta.data_hash == m.meta.data_hash);
  }
}

TEST_CASE("corrupted model files fail to load") {
  const auto m = train_gbdt(separable(), small_gbdt());
  auto text = m.to_json();
  CHECK_THROWS_AS(SurrogateModel::from_json("{}"), Error);
  CHECK_THROWS_AS(SurrogateModel::from_json(text.substr(0, text.size() / 2)), Error);
  const auto pos = text.find("surrogate-model/1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 17, "surrogate-model/9");
  CHECK_THROWS_AS(SurrogateModel::from_json(text), Error);
}

TEST_CASE("gbdt holdout log loss is within 10% of the generating model") {
  const auto out = sim_data(30'000, 19);
  const auto store = JourneyStore::ingest(out.events, out.outcomes, out.listings);
  TrainingOptions o;
  o.scope = LabelScope::pair_final;
  const auto data = build_training_set(store, o);
  const auto [train, hold] = split_holdout(data, 0.3, 1);
  GbdtConfig c;
  c.num_trees = 150;
  c.max_depth = 4;
  c.dropout_rate = 0.0;
  const auto m = train_gbdt(train, c);
  const double model_loss = mean_log_loss(predict_all(m, hold), hold.labels);
  std::vector<double> truth;
  for (const auto& row : hold.rows) truth.push_back(out.truth.booking_probability(row));
  const double true_loss = mean_log_loss(truth, hold.labels);
  MESSAGE("model " << model_loss << " generating " << true_loss);
  CHECK(model_loss <= 1.10 * true_loss);
}

TEST_CASE("more photos viewed rarely lowers the value") {
  const auto out = sim_data(20'000, 23);
  const auto store = JourneyStore::ingest(out.events, out.outcomes, out.listings);
  const auto data = build_training_set(store);
  GbdtConfig c;
  c.num_trees = 100;
  c.max_depth = 4;
  const auto m = train_gbdt(data, c);
  std::size_t ok = 0, total = 0;
  for (std::size_t i = 0; i < data.size() && total < 5000; i += 3) {
    auto x = data.rows[i];
    const double before = m.predict(x);
    x[0] += 5;
    ++total;
    if (m.predict(x) >= before - 1e-12) ++ok;
  }
  const double rate = static_cast<double>(ok) / static_cast<double>(total);
  MESSAGE("non-decreasing fraction " << rate);
  CHECK(rate >= 0.95);
}

TEST_CASE("evaluation metrics on a hand example") {
  const std::vector<double> p = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y = {0, 0, 1, 1};
  CHECK(rank_auc(p, y) == doctest::Approx(0.75));
  const double ll = -(std::log(0.9) + std::log(0.6) + std::log(0.35) + std::log(0.8)) / 4;
  CHECK(mean_log_loss(p, y) == doctest::Approx(ll));
}
