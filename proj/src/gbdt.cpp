#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>

#include "surrogate/error.hpp"
#include "surrogate/learner.hpp"
#include "surrogate/loss.hpp"

namespace surrogate {

namespace detail {

void check_training_input(const LabeledSet& train) {
  if (train.rows.size() != train.labels.size())
    fail(ErrorKind::invalid_argument, "row and label counts differ");
  if (train.rows.size() < 2) fail(ErrorKind::data, "need at least 2 examples");
  std::size_t positives = 0;
  for (std::size_t i = 0; i < train.rows.size(); ++i) {
    const auto& row = train.rows[i];
    if (row.size() != train.feature_count)
      fail(ErrorKind::invalid_argument, "example " + std::to_string(i) + " has " + std::to_string(row.size()) +
                                            " features, expected " + std::to_string(train.feature_count));
    for (double v : row)
      if (std::isnan(v)) fail(ErrorKind::invalid_argument, "NaN feature in example " + std::to_string(i));
    const int y = train.labels[i];
    if (y != 0 && y != 1) fail(ErrorKind::invalid_argument, "labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  if (positives == 0 || positives == train.rows.size())
    fail(ErrorKind::data, "training data has a single class (" + std::to_string(positives) + " positives of " +
                              std::to_string(train.rows.size()) + "); a constant model would be degenerate");
}

void fill_metadata(TrainingMetadata& meta, const LabeledSet& train) {
  meta.data_hash = labeled_set_hash(train);
  meta.examples = train.size();
  meta.positives = static_cast<std::size_t>(std::count(train.labels.begin(), train.labels.end(), 1));
  if (!train.timestamps.empty()) {
    auto [lo, hi] = std::minmax_element(train.timestamps.begin(), train.timestamps.end());
    meta.window_start = *lo;
    meta.window_end = *hi;
  }
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

namespace {

struct Stats {
  double g = 0.0;
  double h = 0.0;
  std::size_t n = 0;
};

struct BestSplit {
  double gain = 0.0;
  std::int32_t feature = -1;
  double threshold = 0.0;
};

struct Running {
  double g = 0.0;
  double h = 0.0;
  std::size_t n = 0;
  double last = 0.0;
};

double split_threshold(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return (mid >= lo && mid < hi) ? mid : lo;
}

class TreeGrower {
 public:
  TreeGrower(const std::vector<std::vector<double>>& cols, const std::vector<std::vector<std::uint32_t>>& order,
             const GbdtConfig& config)
      : cols_(cols), order_(order), config_(config), node_of_(cols.empty() ? 0 : cols[0].size()) {}

  RegressionTree grow(const std::vector<double>& g, const std::vector<double>& h, const std::vector<char>& active) {
    const std::size_t n = node_of_.size();
    RegressionTree tree;
    tree.nodes.emplace_back();
    stats_.assign(1, Stats{});
    for (std::size_t i = 0; i < n; ++i) {
      node_of_[i] = active[i] ? 0 : -1;
      if (active[i]) {
        stats_[0].g += g[i];
        stats_[0].h += h[i];
        ++stats_[0].n;
      }
    }
    const auto min_leaf = static_cast<std::size_t>(config_.min_samples_leaf);
    const double lambda = config_.l2_leaf;
    std::vector<std::int32_t> open = {0};

    for (int depth = 0; depth < config_.max_depth && !open.empty(); ++depth) {
      std::vector<std::int32_t> slot_of(tree.nodes.size(), -1);
      std::vector<std::int32_t> splittable;
      for (auto id : open)
        if (stats_[id].n >= 2 * min_leaf) {
          slot_of[id] = static_cast<std::int32_t>(splittable.size());
          splittable.push_back(id);
        }
      if (splittable.empty()) break;

      std::vector<BestSplit> best(splittable.size());
      std::vector<Running> run(splittable.size());
      for (std::size_t f = 0; f < cols_.size(); ++f) {
        std::fill(run.begin(), run.end(), Running{});
        const auto& col = cols_[f];
        for (std::uint32_t idx : order_[f]) {
          const auto nid = node_of_[idx];
          if (nid < 0) continue;
          const auto slot = slot_of[nid];
          if (slot < 0) continue;
          auto& r = run[slot];
          const double v = col[idx];
          const auto& total = stats_[nid];
          if (r.n >= min_leaf && total.n - r.n >= min_leaf && v > r.last) {
            const double gr = total.g - r.g;
            const double hr = total.h - r.h;
            const double gain = r.g * r.g / (r.h + lambda) + gr * gr / (hr + lambda) -
                                total.g * total.g / (total.h + lambda);
            if (gain > best[slot].gain) best[slot] = {gain, static_cast<std::int32_t>(f), split_threshold(r.last, v)};
          }
          r.g += g[idx];
          r.h += h[idx];
          ++r.n;
          r.last = v;
        }
      }

      std::vector<std::int32_t> next_open;
      std::vector<char> did_split(tree.nodes.size(), 0);
      for (std::size_t s = 0; s < splittable.size(); ++s) {
        if (best[s].feature < 0 || !(best[s].gain > 1e-12)) continue;
        const auto id = splittable[s];
        const auto left = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& node = tree.nodes[id];
        node.feature = best[s].feature;
        node.threshold = best[s].threshold;
        node.left = left;
        node.right = left + 1;
        did_split[id] = 1;
        next_open.push_back(left);
        next_open.push_back(left + 1);
      }
      if (next_open.empty()) break;
      stats_.resize(tree.nodes.size());
      for (std::size_t i = 0; i < n; ++i) {
        const auto nid = node_of_[i];
        if (nid < 0 || !did_split[nid]) continue;
        const auto& node = tree.nodes[nid];
        const auto child = cols_[node.feature][i] <= node.threshold ? node.left : node.right;
        node_of_[i] = child;
        stats_[child].g += g[i];
        stats_[child].h += h[i];
        ++stats_[child].n;
      }
      open = std::move(next_open);
    }

    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      auto& node = tree.nodes[id];
      if (node.is_leaf()) node.value = -stats_[id].g / (stats_[id].h + lambda) * config_.learning_rate;
    }
    return tree;
  }

 private:
  const std::vector<std::vector<double>>& cols_;
  const std::vector<std::vector<std::uint32_t>>& order_;
  const GbdtConfig& config_;
  std::vector<std::int32_t> node_of_;
  std::vector<Stats> stats_;
};

void scale_leaves(RegressionTree& tree, double factor) {
  for (auto& n : tree.nodes)
    if (n.is_leaf()) n.value *= factor;
}

}  // namespace

SurrogateModel train_gbdt(const LabeledSet& train, const GbdtConfig& config) {
  config.validate();
  detail::check_training_input(train);
  const std::size_t n = train.size();
  const std::size_t nf = train.feature_count;

  std::vector<std::vector<double>> cols(nf, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < nf; ++f) cols[f][i] = train.rows[i][f];
  std::vector<std::vector<std::uint32_t>> order(nf, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < nf; ++f) {
    auto& o = order[f];
    std::iota(o.begin(), o.end(), 0u);
    const auto& col = cols[f];
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }

  SurrogateModel model;
  model.kind = ModelKind::gbdt;
  model.feature_count = nf;
  model.gbdt = config;
  detail::fill_metadata(model.meta, train);
  const double base_rate = static_cast<double>(model.meta.positives) / static_cast<double>(n);
  model.bias = logit(base_rate);

  std::vector<double> margin(n, model.bias), used(n), dropped_sum(n), g(n), h(n);
  std::vector<char> active(n, 1);
  std::mt19937_64 rng(config.seed);
  TreeGrower grower(cols, order, config);
  const double eta = config.learning_rate;
  model.trees.reserve(static_cast<std::size_t>(config.num_trees));

  for (int round = 0; round < config.num_trees; ++round) {
    std::vector<std::size_t> dropped;
    if (config.dropout_rate > 0)
      for (std::size_t t = 0; t < model.trees.size(); ++t)
        if (detail::uniform01(rng) < config.dropout_rate) dropped.push_back(t);
    std::fill(dropped_sum.begin(), dropped_sum.end(), 0.0);
    for (auto t : dropped)
      for (std::size_t i = 0; i < n; ++i) dropped_sum[i] += model.trees[t].predict(train.rows[i]);
    for (std::size_t i = 0; i < n; ++i) {
      used[i] = margin[i] - dropped_sum[i];
      g[i] = logistic_gradient(used[i], train.labels[i]);
      h[i] = logistic_hessian(used[i]);
    }
    if (config.subsample < 1.0) {
      std::size_t kept = 0;
      for (std::size_t i = 0; i < n; ++i) kept += (active[i] = detail::uniform01(rng) < config.subsample ? 1 : 0);
      if (kept == 0) std::fill(active.begin(), active.end(), 1);
    }

    RegressionTree tree = grower.grow(g, h, active);
    double drop_scale = 1.0;
    if (!dropped.empty()) {
      const double k = static_cast<double>(dropped.size());
      drop_scale = k / (k + eta);
      scale_leaves(tree, 1.0 / (k + eta));
      for (auto t : dropped) scale_leaves(model.trees[t], drop_scale);
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      margin[i] = used[i] + drop_scale * dropped_sum[i] + tree.predict(train.rows[i]);
      loss += logistic_loss(margin[i], train.labels[i]);
    }
    model.meta.loss_trace.push_back(loss / static_cast<double>(n));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace surrogate
