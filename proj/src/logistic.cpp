#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "surrogate/error.hpp"
#include "surrogate/learner.hpp"
#include "surrogate/loss.hpp"

namespace surrogate {

namespace detail {
void check_training_input(const LabeledSet& train);
void fill_metadata(TrainingMetadata& meta, const LabeledSet& train);
}  // namespace detail

SurrogateModel train_logistic(const LabeledSet& train, const LogisticConfig& config) {
  config.validate();
  detail::check_training_input(train);
  const auto n = static_cast<Eigen::Index>(train.size());
  const std::size_t nf = train.feature_count;

  // Standardise the non-constant columns; constant ones keep weight 0.
  std::vector<std::size_t> used;
  std::vector<double> mean, scale;
  for (std::size_t f = 0; f < nf; ++f) {
    double m = 0.0;
    for (const auto& row : train.rows) m += row[f];
    m /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& row : train.rows) ss += (row[f] - m) * (row[f] - m);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd > 0) {
      used.push_back(f);
      mean.push_back(m);
      scale.push_back(sd);
    }
  }
  const auto p = static_cast<Eigen::Index>(used.size()) + 1;
  Eigen::MatrixXd z(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i, 0) = 1.0;
    for (std::size_t j = 0; j < used.size(); ++j)
      z(i, static_cast<Eigen::Index>(j) + 1) = (train.rows[i][used[j]] - mean[j]) / scale[j];
    y(i) = train.labels[i];
  }
  // Penalty on raw-scale weights w = beta / sd.
  Eigen::VectorXd penalty = Eigen::VectorXd::Zero(p);
  for (std::size_t j = 0; j < used.size(); ++j)
    penalty(static_cast<Eigen::Index>(j) + 1) = config.l2 / (scale[j] * scale[j]);

  auto objective = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd s = z * theta;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) loss += logistic_loss(s(i), train.labels[i]);
    return (loss + 0.5 * theta.dot(penalty.cwiseProduct(theta))) / static_cast<double>(n);
  };

  const double base = std::clamp(y.mean(), 1e-12, 1.0 - 1e-12);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  theta(0) = logit(base);
  double current = objective(theta);

  SurrogateModel model;
  model.kind = ModelKind::logistic;
  model.feature_count = nf;
  model.logistic = config;
  detail::fill_metadata(model.meta, train);
  model.meta.loss_trace.push_back(current);

  int rising = 0;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const Eigen::VectorXd s = z * theta;
    Eigen::VectorXd prob(n), weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = sigmoid(s(i));
      weight(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad = (z.transpose() * (prob - y) + penalty.cwiseProduct(theta)) / static_cast<double>(n);
    if (grad.lpNorm<Eigen::Infinity>() < 1e-8) break;
    Eigen::MatrixXd hess = z.transpose() * (z.array().colwise() * weight.array()).matrix();
    hess.diagonal() += penalty;
    hess /= static_cast<double>(n);
    hess.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hess.ldlt().solve(-grad);
    if (!step.allFinite()) fail(ErrorKind::data, "logistic fit produced a non-finite Newton step");

    // Backtracking (Armijo) along the Newton direction.
    const double slope = grad.dot(step);
    double t = 1.0;
    Eigen::VectorXd candidate = theta + step;
    double next = objective(candidate);
    int halvings = 0;
    while (!(next <= current + 1e-4 * t * slope) && halvings < 50) {
      t *= 0.5;
      candidate = theta + t * step;
      next = objective(candidate);
      ++halvings;
    }
    if (halvings == 50 && !(next < current)) break;  // no further progress at machine precision

    rising = next > current ? rising + 1 : 0;
    theta = candidate;
    current = next;
    model.meta.loss_trace.push_back(current);
    if (rising >= 10) {
      std::ostringstream trace;
      for (double v : model.meta.loss_trace) trace << ' ' << v;
      fail(ErrorKind::data, "logistic fit diverged; loss trace:" + trace.str());
    }
  }

  model.weights.assign(nf, 0.0);
  model.bias = theta(0);
  for (std::size_t j = 0; j < used.size(); ++j) {
    const double beta = theta(static_cast<Eigen::Index>(j) + 1);
    model.weights[used[j]] = beta / scale[j];
    model.bias -= beta * mean[j] / scale[j];
  }
  return model;
}

}  // namespace surrogate
