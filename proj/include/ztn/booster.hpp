#pragma once

// Residual stage of the hybrid forecaster: squared-loss gradient-boosted
// regression trees fit on the recurrent model's errors, the additive
// correction, and the MSE metric.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ztn/errors.hpp"

namespace ztn {

/// Row-major n x d feature matrix.
class FeatureMatrix {
 public:
  FeatureMatrix(std::size_t cols, std::vector<double> values) : cols_(cols), values_(std::move(values)) {
    if (cols_ == 0 || values_.size() % cols_ != 0) throw DataError("feature matrix shape mismatch");
  }
  std::size_t rows() const noexcept { return values_.size() / cols_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

 private:
  std::size_t cols_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Residuals, correction, metric

inline std::vector<double> compute_residuals(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size())
    throw DataError("residuals need equal lengths, got " + std::to_string(actual.size()) + " and " +
                    std::to_string(predicted.size()));
  std::vector<double> out(actual.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = actual[i] - predicted[i];
  return out;
}

/// Adds the predicted residual to the recurrent prediction. No clamping.
inline std::vector<double> hybrid_predict(std::span<const double> predicted, std::span<const double> residual) {
  if (predicted.size() != residual.size()) throw DataError("hybrid correction needs equal lengths");
  std::vector<double> out(predicted.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = predicted[i] + residual[i];
  return out;
}

inline double mse(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) throw DataError("MSE needs equal lengths");
  if (actual.empty()) throw DataError("insufficient data: MSE of an empty series");
  double acc = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = actual[i] - predicted[i];
    acc += d * d;
  }
  return acc / static_cast<double>(actual.size());
}

/// Booster inputs for one window: the last observed value, the eight
/// successive differences inside the window, and the recurrent model's
/// predicted step from the last value. Carries the same information as the
/// raw lags plus the prediction, in a form axis-aligned splits can use.
inline std::vector<double> residual_features(std::span<const double> window_mbps, double recurrent_prediction) {
  if (window_mbps.empty()) throw DataError("empty feature window");
  std::vector<double> f;
  f.reserve(window_mbps.size() + 1);
  const double last = window_mbps.back();
  f.push_back(last);
  for (std::size_t k = 1; k < window_mbps.size(); ++k) f.push_back(window_mbps[k] - window_mbps[k - 1]);
  f.push_back(recurrent_prediction - last);
  return f;
}

// ---------------------------------------------------------------------------
// Trees

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    std::size_t left = 0, right = 0;
  };

  /// Greedy squared-error tree on rows `index` of `x`. Splits send
  /// x[feature] <= threshold left; thresholds are midpoints between adjacent
  /// distinct values. The first best split in (feature, position) order wins.
  static RegressionTree fit(const FeatureMatrix& x, std::span<const double> y, std::size_t max_depth) {
    if (x.rows() != y.size() || y.empty()) throw DataError("tree fit shape mismatch");
    RegressionTree t;
    t.feature_count_ = x.cols();
    std::vector<std::size_t> index(y.size());
    std::iota(index.begin(), index.end(), 0);
    t.grow(x, y, index, max_depth);
    return t;
  }

  static RegressionTree leaf(double value, std::size_t feature_count) {
    RegressionTree t;
    t.feature_count_ = feature_count;
    t.nodes_.push_back({-1, 0.0, value, 0, 0});
    return t;
  }

  double predict(std::span<const double> row) const {
    std::size_t n = 0;
    while (nodes_[n].feature >= 0)
      n = row[static_cast<std::size_t>(nodes_[n].feature)] <= nodes_[n].threshold ? nodes_[n].left : nodes_[n].right;
    return nodes_[n].value;
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t feature_count() const noexcept { return feature_count_; }

  nlohmann::json to_json(std::size_t n = 0) const {
    const Node& node = nodes_[n];
    if (node.feature < 0) return {{"leaf", node.value}};
    return {{"feature", node.feature},
            {"threshold", node.threshold},
            {"left", to_json(node.left)},
            {"right", to_json(node.right)}};
  }

  static RegressionTree from_json(const nlohmann::json& doc, std::size_t feature_count) {
    RegressionTree t;
    t.feature_count_ = feature_count;
    t.read(doc);
    return t;
  }

 private:
  std::size_t grow(const FeatureMatrix& x, std::span<const double> y, std::vector<std::size_t> index,
                   std::size_t depth_left) {
    double sum = 0.0;
    for (std::size_t i : index) sum += y[i];
    const double mean = sum / static_cast<double>(index.size());
    const std::size_t id = nodes_.size();
    nodes_.push_back({-1, 0.0, mean, 0, 0});
    if (depth_left == 0 || index.size() < 2) return id;

    const double n = static_cast<double>(index.size());
    const double parent_score = sum * sum / n;
    double best_gain = 1e-12 * std::max(1.0, parent_score);
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order(index);
    for (std::size_t f = 0; f < x.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x.at(a, f) < x.at(b, f); });
      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left_sum += y[order[k]];
        const double lo = x.at(order[k], f), hi = x.at(order[k + 1], f);
        if (!(lo < hi)) continue;
        const double nl = static_cast<double>(k + 1), nr = n - nl;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent_score;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = lo + 0.5 * (hi - lo);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t i : index)
      (x.at(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(i);
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    const std::size_t l = grow(x, y, std::move(left), depth_left - 1);
    const std::size_t r = grow(x, y, std::move(right), depth_left - 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::size_t read(const nlohmann::json& doc) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({});
    if (doc.contains("leaf")) {
      nodes_[id].value = doc.at("leaf").get<double>();
      return id;
    }
    const int f = doc.at("feature").get<int>();
    if (f < 0 || static_cast<std::size_t>(f) >= feature_count_) throw DataError("tree split on unknown feature");
    nodes_[id].feature = f;
    nodes_[id].threshold = doc.at("threshold").get<double>();
    const std::size_t l = read(doc.at("left"));
    const std::size_t r = read(doc.at("right"));
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<Node> nodes_;
  std::size_t feature_count_ = 0;
};

// ---------------------------------------------------------------------------
// Ensemble

struct BoosterParams {
  std::size_t n_estimators = 100;
  double learning_rate = 0.5;
  std::size_t max_depth = 3;
  std::uint64_t seed = 1;  // recorded only: no row or column subsampling
};

class BoostedEnsemble {
 public:
  BoostedEnsemble(double base, double learning_rate, std::size_t feature_count, std::vector<RegressionTree> trees = {})
      : base_(base), learning_rate_(learning_rate), feature_count_(feature_count), trees_(std::move(trees)) {}

  /// Stagewise squared-loss boosting. Starts from the target mean; each tree
  /// fits the current residuals and is added with shrinkage.
  static BoostedEnsemble fit(const FeatureMatrix& x, std::span<const double> targets, const BoosterParams& p) {
    if (targets.empty() || x.rows() == 0) throw DataError("insufficient data: empty booster training set");
    if (x.rows() != targets.size()) throw DataError("booster features and targets differ in length");
    if (!(p.learning_rate > 0.0)) throw ConfigError("booster learning rate must be > 0");
    const double base = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
    BoostedEnsemble e(base, p.learning_rate, x.cols());
    std::vector<double> current(targets.size(), base);
    std::vector<double> residual(targets.size());
    e.training_loss_.push_back(mse(targets, current));
    for (std::size_t round = 0; round < p.n_estimators; ++round) {
      for (std::size_t i = 0; i < targets.size(); ++i) residual[i] = targets[i] - current[i];
      auto tree = RegressionTree::fit(x, residual, p.max_depth);
      for (std::size_t i = 0; i < targets.size(); ++i) current[i] += p.learning_rate * tree.predict(x.row(i));
      e.trees_.push_back(std::move(tree));
      e.training_loss_.push_back(mse(targets, current));
    }
    return e;
  }

  double predict(std::span<const double> row) const {
    if (row.size() != feature_count_)
      throw DataError("booster expects " + std::to_string(feature_count_) + " features, got " +
                      std::to_string(row.size()));
    double sum = 0.0;
    for (const auto& t : trees_) sum += t.predict(row);
    return base_ + learning_rate_ * sum;
  }

  std::vector<double> predict(const FeatureMatrix& x) const {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = predict(x.row(i));
    return out;
  }

  double base() const noexcept { return base_; }
  double learning_rate() const noexcept { return learning_rate_; }
  std::size_t feature_count() const noexcept { return feature_count_; }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  /// Training MSE before the first tree and after each round.
  const std::vector<double>& training_loss() const noexcept { return training_loss_; }

  nlohmann::json to_json() const {
    nlohmann::json doc{{"base_prediction", base_},
                       {"learning_rate", learning_rate_},
                       {"feature_count", feature_count_},
                       {"trees", nlohmann::json::array()}};
    for (const auto& t : trees_) doc["trees"].push_back(t.to_json());
    return doc;
  }

  static BoostedEnsemble from_json(const nlohmann::json& doc) {
    try {
      const auto features = doc.at("feature_count").get<std::size_t>();
      std::vector<RegressionTree> trees;
      for (const auto& t : doc.at("trees")) trees.push_back(RegressionTree::from_json(t, features));
      return BoostedEnsemble(doc.at("base_prediction").get<double>(), doc.at("learning_rate").get<double>(), features,
                             std::move(trees));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed booster document: ") + e.what());
    }
  }

 private:
  double base_;
  double learning_rate_;
  std::size_t feature_count_;
  std::vector<RegressionTree> trees_;
  std::vector<double> training_loss_;
};

}  // namespace ztn
