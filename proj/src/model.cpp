#include "surrogate/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "surrogate/error.hpp"
#include "surrogate/features.hpp"
#include "surrogate/loss.hpp"

namespace surrogate {

using nlohmann::ordered_json;

void GbdtConfig::validate() const {
  if (num_trees < 1) fail(ErrorKind::config, "num_trees must be at least 1");
  if (max_depth < 1) fail(ErrorKind::config, "max_depth must be at least 1");
  if (!(learning_rate > 0)) fail(ErrorKind::config, "learning_rate must be positive");
  if (min_samples_leaf < 1) fail(ErrorKind::config, "min_samples_leaf must be at least 1");
  if (!(dropout_rate >= 0 && dropout_rate < 1)) fail(ErrorKind::config, "dropout_rate must be in [0,1)");
  if (!(subsample > 0 && subsample <= 1)) fail(ErrorKind::config, "subsample must be in (0,1]");
  if (!(l2_leaf >= 0)) fail(ErrorKind::config, "l2_leaf must be nonnegative");
}

void LogisticConfig::validate() const {
  if (!(l2 >= 0)) fail(ErrorKind::config, "l2 must be nonnegative");
  if (max_iterations < 1) fail(ErrorKind::config, "iterations must be at least 1");
}

double SurrogateModel::raw_score(std::span<const double> x) const {
  double s = bias;
  if (kind == ModelKind::gbdt) {
    for (const auto& t : trees) s += t.predict(x);
  } else {
    for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * x[i];
  }
  return s;
}

double SurrogateModel::predict(std::span<const double> x) const {
  if (x.size() != feature_count)
    fail(ErrorKind::invalid_argument, "feature vector has " + std::to_string(x.size()) + " slots, model expects " +
                                          std::to_string(feature_count));
  return sigmoid(raw_score(x));
}

std::string SurrogateModel::to_json() const {
  ordered_json doc;
  doc["version"] = kModelVersion;
  doc["kind"] = kind == ModelKind::gbdt ? "gbdt" : "logistic";
  doc["feature_count"] = feature_count;
  if (feature_count == kFeatureCount) {
    auto names = ordered_json::array();
    for (auto n : kFeatureNames) names.push_back(std::string(n));
    doc["feature_names"] = names;
  }
  ordered_json cfg;
  if (kind == ModelKind::gbdt) {
    cfg["num_trees"] = gbdt.num_trees;
    cfg["max_depth"] = gbdt.max_depth;
    cfg["learning_rate"] = gbdt.learning_rate;
    cfg["min_samples_leaf"] = gbdt.min_samples_leaf;
    cfg["dropout_rate"] = gbdt.dropout_rate;
    cfg["subsample"] = gbdt.subsample;
    cfg["l2_leaf"] = gbdt.l2_leaf;
    cfg["seed"] = gbdt.seed;
  } else {
    cfg["l2"] = logistic.l2;
    cfg["iterations"] = logistic.max_iterations;
  }
  doc["config"] = cfg;
  doc["bias"] = bias;
  if (kind == ModelKind::gbdt) {
    auto arr = ordered_json::array();
    for (const auto& t : trees) {
      auto nodes = ordered_json::array();
      for (const auto& n : t.nodes) {
        ordered_json node;
        if (n.is_leaf()) {
          node["leaf"] = n.value;
        } else {
          node["feature"] = n.feature;
          node["threshold"] = n.threshold;
          node["left"] = n.left;
          node["right"] = n.right;
        }
        nodes.push_back(std::move(node));
      }
      arr.push_back(std::move(nodes));
    }
    doc["trees"] = std::move(arr);
  } else {
    doc["weights"] = weights;
  }
  ordered_json tm;
  tm["data_hash"] = meta.data_hash;
  tm["examples"] = meta.examples;
  tm["positives"] = meta.positives;
  tm["window_start_ms"] = meta.window_start;
  tm["window_end_ms"] = meta.window_end;
  tm["loss_trace"] = meta.loss_trace;
  doc["training"] = std::move(tm);
  return doc.dump(1);
}

namespace {

template <typename T>
T get(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorKind::parse, std::string("model file missing '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("model file field '") + key + "': " + e.what());
  }
}

}  // namespace

SurrogateModel SurrogateModel::from_json(const std::string& text) {
  ordered_json doc = ordered_json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) fail(ErrorKind::parse, "model file is not a JSON object");
  if (get<std::string>(doc, "version") != kModelVersion)
    fail(ErrorKind::parse, "unsupported model version '" + get<std::string>(doc, "version") + "'");
  SurrogateModel m;
  const auto kind = get<std::string>(doc, "kind");
  if (kind == "gbdt") m.kind = ModelKind::gbdt;
  else if (kind == "logistic") m.kind = ModelKind::logistic;
  else fail(ErrorKind::parse, "unknown model kind '" + kind + "'");
  m.feature_count = get<std::size_t>(doc, "feature_count");
  m.bias = get<double>(doc, "bias");
  const auto& cfg = doc.at("config");
  if (m.kind == ModelKind::gbdt) {
    m.gbdt.num_trees = get<int>(cfg, "num_trees");
    m.gbdt.max_depth = get<int>(cfg, "max_depth");
    m.gbdt.learning_rate = get<double>(cfg, "learning_rate");
    m.gbdt.min_samples_leaf = get<int>(cfg, "min_samples_leaf");
    m.gbdt.dropout_rate = get<double>(cfg, "dropout_rate");
    m.gbdt.subsample = get<double>(cfg, "subsample");
    m.gbdt.l2_leaf = get<double>(cfg, "l2_leaf");
    m.gbdt.seed = get<std::uint64_t>(cfg, "seed");
    for (const auto& tree : doc.at("trees")) {
      RegressionTree t;
      for (const auto& node : tree) {
        TreeNode n;
        if (node.contains("leaf")) {
          n.value = get<double>(node, "leaf");
          if (!std::isfinite(n.value)) fail(ErrorKind::parse, "non-finite leaf value");
        } else {
          n.feature = get<std::int32_t>(node, "feature");
          n.threshold = get<double>(node, "threshold");
          n.left = get<std::int32_t>(node, "left");
          n.right = get<std::int32_t>(node, "right");
          if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= m.feature_count)
            fail(ErrorKind::parse, "split feature out of range");
        }
        t.nodes.push_back(n);
      }
      const auto size = static_cast<std::int32_t>(t.nodes.size());
      if (size == 0) fail(ErrorKind::parse, "empty tree");
      for (const auto& n : t.nodes)
        if (!n.is_leaf() && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size))
          fail(ErrorKind::parse, "child index out of range");
      m.trees.push_back(std::move(t));
    }
  } else {
    m.logistic.l2 = get<double>(cfg, "l2");
    m.logistic.max_iterations = get<int>(cfg, "iterations");
    m.weights = get<std::vector<double>>(doc, "weights");
    if (m.weights.size() != m.feature_count) fail(ErrorKind::parse, "weight count does not match feature_count");
  }
  if (auto it = doc.find("training"); it != doc.end()) {
    const auto& tm = *it;
    m.meta.data_hash = get<std::string>(tm, "data_hash");
    m.meta.examples = get<std::size_t>(tm, "examples");
    m.meta.positives = get<std::size_t>(tm, "positives");
    m.meta.window_start = get<TimestampMs>(tm, "window_start_ms");
    m.meta.window_end = get<TimestampMs>(tm, "window_end_ms");
    m.meta.loss_trace = get<std::vector<double>>(tm, "loss_trace");
  }
  return m;
}

void SurrogateModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::data, "cannot write " + path);
  out << to_json() << '\n';
}

SurrogateModel SurrogateModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::not_found, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace surrogate
