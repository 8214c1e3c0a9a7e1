#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>

#include "surrogate/error.hpp"
#include "surrogate/hash.hpp"
#include "surrogate/learner.hpp"
#include "surrogate/loss.hpp"

namespace surrogate {

namespace detail {
double uniform01(std::mt19937_64& rng);
}

std::vector<double> predict_all(const SurrogateModel& model, const LabeledSet& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& row : data.rows) out.push_back(model.predict(row));
  return out;
}

double mean_log_loss(std::span<const double> predictions, std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], 1e-15, 1.0 - 1e-15);
    total -= labels[i] ? std::log(p) : std::log1p(-p);
  }
  return total / static_cast<double>(predictions.size());
}

double rank_auc(std::span<const double> predictions, std::span<const int> labels) {
  const std::size_t n = predictions.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return predictions[a] < predictions[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && predictions[idx[j]] == predictions[idx[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]]) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::numeric_limits<double>::quiet_NaN();
  const double np = static_cast<double>(positives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(negatives));
}

ModelReport evaluate_predictions(std::span<const double> predictions, std::span<const int> labels) {
  if (predictions.empty()) fail(ErrorKind::invalid_argument, "evaluation set is empty");
  if (predictions.size() != labels.size()) fail(ErrorKind::invalid_argument, "prediction/label size mismatch");
  ModelReport r;
  r.examples = predictions.size();
  r.log_loss = mean_log_loss(predictions, labels);
  r.auc = rank_auc(predictions, labels);

  std::array<double, 10> pred_sum{}, label_sum{};
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto b = std::min<std::size_t>(9, static_cast<std::size_t>(std::max(0.0, predictions[i]) * 10.0));
    pred_sum[b] += predictions[i];
    label_sum[b] += labels[i];
    ++r.calibration[b].count;
  }
  for (std::size_t b = 0; b < 10; ++b) {
    auto& bin = r.calibration[b];
    if (bin.count == 0) continue;
    bin.mean_prediction = pred_sum[b] / static_cast<double>(bin.count);
    bin.empirical_rate = label_sum[b] / static_cast<double>(bin.count);
  }

  r.calibration_slope = r.calibration_intercept = std::numeric_limits<double>::quiet_NaN();
  LabeledSet recal;
  recal.feature_count = 1;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], 1e-12, 1.0 - 1e-12);
    recal.rows.push_back({logit(p)});
    recal.labels.push_back(labels[i]);
  }
  try {
    const auto fit = train_logistic(recal, LogisticConfig{0.0, 50});
    r.calibration_slope = fit.weights[0];
    r.calibration_intercept = fit.bias;
  } catch (const Error&) {
    // single-class holdout or constant predictions: slope stays undefined
  }
  return r;
}

ModelReport evaluate(const SurrogateModel& model, const LabeledSet& holdout) {
  const auto predictions = predict_all(model, holdout);
  return evaluate_predictions(predictions, holdout.labels);
}

std::string labeled_set_hash(const LabeledSet& data) {
  std::vector<unsigned char> bytes;
  bytes.reserve(data.size() * (data.feature_count * sizeof(double) + 1));
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.rows[i]) {
      unsigned char buf[sizeof(double)];
      std::memcpy(buf, &v, sizeof v);
      bytes.insert(bytes.end(), buf, buf + sizeof buf);
    }
    bytes.push_back(static_cast<unsigned char>(data.labels[i]));
  }
  return sha256_hex(std::span<const unsigned char>(bytes));
}

std::pair<LabeledSet, LabeledSet> split_holdout(const LabeledSet& data, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0 && holdout_fraction < 1))
    fail(ErrorKind::invalid_argument, "holdout fraction must be in (0,1)");
  const std::size_t n = data.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(detail::uniform01(rng) * static_cast<double>(i));
    std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
  }
  const auto n_hold = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n)));
  std::vector<char> is_hold(n, 0);
  for (std::size_t k = 0; k < n_hold; ++k) is_hold[idx[k]] = 1;
  LabeledSet train, hold;
  train.feature_count = hold.feature_count = data.feature_count;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = is_hold[i] ? hold : train;
    dst.rows.push_back(data.rows[i]);
    dst.labels.push_back(data.labels[i]);
    if (i < data.timestamps.size()) dst.timestamps.push_back(data.timestamps[i]);
  }
  return {std::move(train), std::move(hold)};
}

}  // namespace surrogate
