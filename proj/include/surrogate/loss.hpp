#pragma once

#include <cmath>
#include <limits>

namespace surrogate {

// Result lies strictly inside (0, 1) for every finite score.
inline double sigmoid(double score) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  double p;
  if (score >= 0) {
    p = 1.0 / (1.0 + std::exp(-score));
  } else {
    const double e = std::exp(score);
    p = e / (1.0 + e);
  }
  return p < lo ? lo : (p > hi ? hi : p);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Logistic loss of a raw score: log(1 + e^s) - y s.
inline double logistic_loss(double score, int label) {
  const double softplus = score > 0 ? score + std::log1p(std::exp(-score)) : std::log1p(std::exp(score));
  return softplus - label * score;
}

// d loss / d score
inline double logistic_gradient(double score, int label) { return sigmoid(score) - label; }

// d^2 loss / d score^2
inline double logistic_hessian(double score) {
  const double p = sigmoid(score);
  return p * (1.0 - p);
}

}  // namespace surrogate
