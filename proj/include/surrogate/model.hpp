#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "surrogate/types.hpp"

namespace surrogate {

inline constexpr const char* kModelVersion = "surrogate-model/1";

struct GbdtConfig {
  int num_trees = 200;
  int max_depth = 5;
  double learning_rate = 0.1;
  int min_samples_leaf = 20;
  double dropout_rate = 0.1;
  double subsample = 1.0;
  double l2_leaf = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LogisticConfig {
  double l2 = 1e-6;
  int max_iterations = 100;

  void validate() const;
};

// Internal nodes route x[feature] <= threshold to the left child.
struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const {
    std::int32_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[i].value;
  }
};

enum class ModelKind { gbdt, logistic };

struct TrainingMetadata {
  std::string data_hash;
  std::size_t examples = 0;
  std::size_t positives = 0;
  TimestampMs window_start = 0;  // earliest view time in the training data
  TimestampMs window_end = 0;    // latest view time in the training data
  std::vector<double> loss_trace;
};

// Trained V(S) = P(Y = 1 | S). Immutable after training; safe to share across
// threads for prediction.
struct SurrogateModel {
  ModelKind kind = ModelKind::gbdt;
  std::size_t feature_count = 0;
  double bias = 0.0;  // base score (gbdt) or intercept (logistic)
  std::vector<RegressionTree> trees;
  std::vector<double> weights;
  GbdtConfig gbdt;
  LogisticConfig logistic;
  TrainingMetadata meta;

  double raw_score(std::span<const double> x) const;
  // Throws invalid_argument on a length mismatch.
  double predict(std::span<const double> x) const;

  std::string to_json() const;
  static SurrogateModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static SurrogateModel load(const std::string& path);
};

}  // namespace surrogate
