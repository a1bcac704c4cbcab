#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "falldet/common.hpp"
#include "falldet/tensor.hpp"

namespace falldet {

// ---------------------------------------------------------------------------
// Gradient-boosted trees (softmax multiclass, second-order split gain)

struct GBTConfig {
  int n_estimators = 100;
  double learning_rate = 0.5;
  int max_depth = 6;
  int min_samples_leaf = 1;
  double lambda = 1.0;  // L2 leaf regularization
  std::string preset = "custom";

  void validate() const {
    if (n_estimators < 1) throw ConfigError("gbt: n_estimators must be >= 1");
    if (max_depth < 1) throw ConfigError("gbt: max_depth must be >= 1");
    if (!(learning_rate >= 0.0 && learning_rate <= 1.0)) {
      throw ConfigError("gbt: learning rate must be in [0,1] (0 only as a degenerate edge)");
    }
    if (min_samples_leaf < 1) throw ConfigError("gbt: min_samples_leaf must be >= 1");
    if (lambda < 0) throw ConfigError("gbt: lambda must be >= 0");
  }
};

inline GBTConfig xgb_like_preset() {
  GBTConfig c;
  c.n_estimators = 100;
  c.learning_rate = 0.5;
  c.max_depth = 6;
  c.lambda = 1.0;
  c.preset = "xgb-like";
  return c;
}

inline GBTConfig cat_like_preset() {
  GBTConfig c;
  c.n_estimators = 500;
  c.learning_rate = 0.25;
  c.max_depth = 12;
  c.lambda = 1.0;
  c.preset = "cat-like";
  return c;
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1, right = -1;
  double leaf = 0;

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  double predict_one(const float* x) const {
    int i = 0;
    while (!nodes[static_cast<size_t>(i)].is_leaf()) {
      const TreeNode& nd = nodes[static_cast<size_t>(i)];
      i = x[nd.feature] < nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<size_t>(i)].leaf;
  }
};

struct StumpSearchResult {
  bool found = false;
  int feature = -1;
  double threshold = 0;
  double gain = 0;
  double left_value = 0, right_value = 0;  // -G/(H+lambda) of the children
};

namespace detail {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0;
  double gain = 0;
};

/// Per-feature sample orders, presorted by (value, index) once per fit and
/// stably partitioned down the tree so node scans never re-sort.
struct FeatureOrders {
  int n = 0;
  std::vector<std::vector<int>> order;  // [feature][position] -> sample index

  static FeatureOrders build(const Tensor<float>& x) {
    FeatureOrders fo;
    fo.n = x.dim(0);
    int d = x.dim(1);
    fo.order.assign(static_cast<size_t>(d), {});
    for (int f = 0; f < d; ++f) {
      auto& ord = fo.order[static_cast<size_t>(f)];
      ord.resize(static_cast<size_t>(fo.n));
      for (int i = 0; i < fo.n; ++i) ord[static_cast<size_t>(i)] = i;
      std::stable_sort(ord.begin(), ord.end(),
                       [&](int a, int b) { return x(a, f) < x(b, f); });
    }
    return fo;
  }
};

/// Exact greedy search over a node's presorted subrange [lo,hi): every
/// feature, every midpoint between adjacent distinct observed values, scored
/// by the second-order gain. Candidates are scanned feature-ascending then
/// threshold-ascending; only a strict improvement replaces the incumbent, so
/// exact ties keep the earliest candidate.
inline SplitChoice best_split(const Tensor<float>& x, const FeatureOrders& orders, int lo, int hi,
                              const std::vector<double>& g, const std::vector<double>& h,
                              double lambda, int min_samples_leaf) {
  int d = x.dim(1);
  int n = hi - lo;
  SplitChoice best;
  double g_total = 0, h_total = 0;
  for (int p = lo; p < hi; ++p) {
    int i = orders.order[0][static_cast<size_t>(p)];
    g_total += g[static_cast<size_t>(i)];
    h_total += h[static_cast<size_t>(i)];
  }
  double parent_score = g_total * g_total / (h_total + lambda);

  for (int f = 0; f < d; ++f) {
    const int* ord = orders.order[static_cast<size_t>(f)].data() + lo;
    double gl = 0, hl = 0;
    for (int p = 0; p + 1 < n; ++p) {
      int i = ord[p];
      gl += g[static_cast<size_t>(i)];
      hl += h[static_cast<size_t>(i)];
      float v = x(i, f), vnext = x(ord[p + 1], f);
      if (v == vnext) continue;  // no boundary between equal values
      int nl = p + 1, nr = n - nl;
      if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
      double gr = g_total - gl, hr = h_total - hl;
      double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_score);
      if (gain > best.gain + 1e-12) {
        best.found = true;
        best.feature = f;
        best.threshold = (static_cast<double>(v) + vnext) / 2.0;
        best.gain = gain;
      }
    }
  }
  return best;
}

/// Stable-partition every feature's subrange by the chosen split; returns the
/// left-block size. Relative (value, index) order is preserved on both sides.
inline int partition_orders(const Tensor<float>& x, FeatureOrders& orders, int lo, int hi,
                            int feature, double threshold, std::vector<int>& scratch) {
  int nl = 0;
  for (size_t f = 0; f < orders.order.size(); ++f) {
    auto& ord = orders.order[f];
    scratch.clear();
    int w = lo;
    for (int p = lo; p < hi; ++p) {
      int i = ord[static_cast<size_t>(p)];
      if (x(i, feature) < threshold) {
        ord[static_cast<size_t>(w++)] = i;
      } else {
        scratch.push_back(i);
      }
    }
    std::copy(scratch.begin(), scratch.end(), ord.begin() + w);
    nl = w - lo;
  }
  return nl;
}

inline int grow_gbt_node(DecisionTree& tree, const Tensor<float>& x, FeatureOrders& orders, int lo,
                         int hi, const std::vector<double>& g, const std::vector<double>& h,
                         const GBTConfig& cfg, int depth, std::vector<int>& scratch) {
  double g_sum = 0, h_sum = 0;
  for (int p = lo; p < hi; ++p) {
    int i = orders.order[0][static_cast<size_t>(p)];
    g_sum += g[static_cast<size_t>(i)];
    h_sum += h[static_cast<size_t>(i)];
  }
  auto make_leaf = [&]() {
    TreeNode nd;
    nd.leaf = -g_sum / (h_sum + cfg.lambda);
    tree.nodes.push_back(nd);
    return static_cast<int>(tree.nodes.size()) - 1;
  };
  int n = hi - lo;
  if (depth >= cfg.max_depth || n < 2 || n < 2 * cfg.min_samples_leaf) return make_leaf();
  SplitChoice split = best_split(x, orders, lo, hi, g, h, cfg.lambda, cfg.min_samples_leaf);
  if (!split.found) return make_leaf();

  int nl = partition_orders(x, orders, lo, hi, split.feature, split.threshold, scratch);
  TreeNode nd;
  nd.feature = split.feature;
  nd.threshold = split.threshold;
  tree.nodes.push_back(nd);
  int self = static_cast<int>(tree.nodes.size()) - 1;
  int l = grow_gbt_node(tree, x, orders, lo, lo + nl, g, h, cfg, depth + 1, scratch);
  int r = grow_gbt_node(tree, x, orders, lo + nl, hi, g, h, cfg, depth + 1, scratch);
  tree.nodes[static_cast<size_t>(self)].left = l;
  tree.nodes[static_cast<size_t>(self)].right = r;
  return self;
}

inline void check_features(const Tensor<float>& x) {
  if (x.rank() != 2) throw ShapeError(cat("feature matrix must be rank 2, got ", shape_str(x.shape())));
  for (long long i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i])) throw ValueError("feature matrix contains NaN");
  }
}

inline void softmax_rows(const std::vector<double>& scores, int n, int k, std::vector<double>& probs) {
  probs.resize(static_cast<size_t>(n) * k);
  for (int i = 0; i < n; ++i) {
    const double* row = &scores[static_cast<size_t>(i) * k];
    double mx = row[0];
    for (int c = 1; c < k; ++c) mx = std::max(mx, row[c]);
    double denom = 0;
    for (int c = 0; c < k; ++c) denom += std::exp(row[c] - mx);
    for (int c = 0; c < k; ++c) probs[static_cast<size_t>(i) * k + c] = std::exp(row[c] - mx) / denom;
  }
}

}  // namespace detail

/// One boosting round holds one tree per class; prediction is softmax over
/// base + lr * sum of tree outputs.
struct GBTModel {
  GBTConfig config;
  int n_classes = kNumClasses;
  int n_features = kNumSensorFeatures;
  double base_score = 0.0;
  std::vector<std::vector<DecisionTree>> rounds;  // rounds[r][class]
  std::vector<double> train_loss;                 // log-loss after each round

  void accumulate_scores(const Tensor<float>& x, std::vector<double>& scores) const {
    int n = x.dim(0);
    scores.assign(static_cast<size_t>(n) * n_classes, base_score);
    for (const auto& round : rounds) {
      for (int c = 0; c < n_classes; ++c) {
        for (int i = 0; i < n; ++i) {
          scores[static_cast<size_t>(i) * n_classes + c] +=
              config.learning_rate * round[static_cast<size_t>(c)].predict_one(&x(i, 0));
        }
      }
    }
  }
};

/// Expose the exact-greedy stump search for oracle comparisons.
inline StumpSearchResult gbt_best_stump(const Tensor<float>& x, const std::vector<double>& g,
                                        const std::vector<double>& h, double lambda,
                                        int min_samples_leaf = 1) {
  detail::FeatureOrders orders = detail::FeatureOrders::build(x);
  detail::SplitChoice c = detail::best_split(x, orders, 0, x.dim(0), g, h, lambda, min_samples_leaf);
  StumpSearchResult out;
  out.found = c.found;
  out.feature = c.feature;
  out.threshold = c.threshold;
  out.gain = c.gain;
  if (c.found) {
    double gl = 0, hl = 0, gr = 0, hr = 0;
    for (int i = 0; i < x.dim(0); ++i) {
      if (x(i, c.feature) < c.threshold) {
        gl += g[static_cast<size_t>(i)];
        hl += h[static_cast<size_t>(i)];
      } else {
        gr += g[static_cast<size_t>(i)];
        hr += h[static_cast<size_t>(i)];
      }
    }
    out.left_value = -gl / (hl + lambda);
    out.right_value = -gr / (hr + lambda);
  }
  return out;
}

inline double multiclass_log_loss(const std::vector<double>& probs, const std::vector<int>& y, int k) {
  double total = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    double p = probs[i * static_cast<size_t>(k) + static_cast<size_t>(y[i])];
    total += -std::log(std::max(p, 1e-15));
  }
  return total / static_cast<double>(y.size());
}

inline GBTModel gbt_fit(const Tensor<float>& x, const std::vector<int>& y, const GBTConfig& cfg,
                        int n_classes = kNumClasses) {
  cfg.validate();
  detail::check_features(x);
  int n = x.dim(0);
  if (n < 2) throw ValueError("gbt_fit: need at least 2 samples");
  if (n < cfg.min_samples_leaf) throw ValueError("gbt_fit: fewer samples than min_samples_leaf");
  if (static_cast<int>(y.size()) != n) throw ShapeError("gbt_fit: labels do not match rows");
  for (int v : y) {
    if (v < 0 || v >= n_classes) throw ValueError(cat("gbt_fit: label ", v, " out of range"));
  }

  GBTModel model;
  model.config = cfg;
  model.n_classes = n_classes;
  model.n_features = x.dim(1);

  std::vector<double> scores(static_cast<size_t>(n) * n_classes, model.base_score);
  std::vector<double> probs, g(static_cast<size_t>(n)), h(static_cast<size_t>(n));
  const detail::FeatureOrders presorted = detail::FeatureOrders::build(x);
  std::vector<int> scratch;
  scratch.reserve(static_cast<size_t>(n));

  detail::softmax_rows(scores, n, n_classes, probs);
  double prev_loss = multiclass_log_loss(probs, y, n_classes);

  for (int r = 0; r < cfg.n_estimators; ++r) {
    std::vector<DecisionTree> round(static_cast<size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c) {
      for (int i = 0; i < n; ++i) {
        double p = probs[static_cast<size_t>(i) * n_classes + c];
        g[static_cast<size_t>(i)] = p - (y[static_cast<size_t>(i)] == c ? 1.0 : 0.0);
        h[static_cast<size_t>(i)] = p * (1.0 - p);
      }
      detail::FeatureOrders orders = presorted;  // partitioning mutates the copy
      detail::grow_gbt_node(round[static_cast<size_t>(c)], x, orders, 0, n, g, h, cfg, 0, scratch);
      for (int i = 0; i < n; ++i) {
        scores[static_cast<size_t>(i) * n_classes + c] +=
            cfg.learning_rate * round[static_cast<size_t>(c)].predict_one(&x(i, 0));
      }
    }
    model.rounds.push_back(std::move(round));
    detail::softmax_rows(scores, n, n_classes, probs);
    double loss = multiclass_log_loss(probs, y, n_classes);
    if (loss > prev_loss + 1e-9 + 1e-9 * std::abs(prev_loss)) {
      throw DivergenceError(cat("gbt_fit: training log-loss increased at round ", r, " (",
                                prev_loss, " -> ", loss, ")"));
    }
    model.train_loss.push_back(loss);
    prev_loss = loss;
  }
  return model;
}

struct TreePrediction {
  std::vector<int> labels;
  std::vector<double> probs;  // row-major n x classes
};

inline TreePrediction gbt_predict(const GBTModel& model, const Tensor<float>& x) {
  detail::check_features(x);
  if (x.dim(1) != model.n_features) {
    throw ShapeError(cat("gbt_predict: model expects ", model.n_features, " features, got ",
                         x.dim(1)));
  }
  int n = x.dim(0);
  std::vector<double> scores;
  model.accumulate_scores(x, scores);
  TreePrediction out;
  detail::softmax_rows(scores, n, model.n_classes, out.probs);
  out.labels.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double* row = &out.probs[static_cast<size_t>(i) * model.n_classes];
    int best = 0;
    for (int c = 1; c < model.n_classes; ++c) {
      if (row[c] > row[best]) best = c;
    }
    out.labels[static_cast<size_t>(i)] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// K-nearest neighbors (brute force, Euclidean)

/// Majority vote among the k nearest training points; distance ties resolve
/// by training index, vote ties by smallest class index.
inline std::vector<int> knn_predict(const Tensor<float>& train_x, const std::vector<int>& train_y,
                                    const Tensor<float>& query_x, int k = 5,
                                    int n_classes = kNumClasses) {
  detail::check_features(train_x);
  detail::check_features(query_x);
  int n = train_x.dim(0), d = train_x.dim(1);
  if (k < 1 || k > n) throw ValueError(cat("knn: k=", k, " outside [1,", n, "]"));
  if (query_x.dim(1) != d) throw ShapeError("knn: query feature width differs from training");
  if (static_cast<int>(train_y.size()) != n) throw ShapeError("knn: labels do not match rows");

  std::vector<int> out(static_cast<size_t>(query_x.dim(0)));
  std::vector<std::pair<double, int>> dist(static_cast<size_t>(n));
  for (int q = 0; q < query_x.dim(0); ++q) {
    for (int i = 0; i < n; ++i) {
      double acc = 0;
      const float* a = &train_x(i, 0);
      const float* b = &query_x(q, 0);
      for (int j = 0; j < d; ++j) {
        double diff = static_cast<double>(a[j]) - b[j];
        acc += diff * diff;
      }
      dist[static_cast<size_t>(i)] = {acc, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::vector<int> votes(static_cast<size_t>(n_classes), 0);
    for (int i = 0; i < k; ++i) ++votes[static_cast<size_t>(train_y[static_cast<size_t>(dist[static_cast<size_t>(i)].second)])];
    int best = 0;
    for (int c = 1; c < n_classes; ++c) {
      if (votes[static_cast<size_t>(c)] > votes[static_cast<size_t>(best)]) best = c;
    }
    out[static_cast<size_t>(q)] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random forest (Gini, bootstrap, sqrt(d) features per split)

struct RFConfig {
  int n_trees = 10;
  bool bootstrap = true;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  uint64_t seed = 42;
};

struct RFModel {
  RFConfig config;
  int n_classes = kNumClasses;
  int n_features = kNumSensorFeatures;
  std::vector<DecisionTree> trees;  // leaf value = class index
};

namespace detail {

inline double gini(const std::vector<int>& counts, int total) {
  if (total == 0) return 0;
  double acc = 1.0;
  for (int c : counts) {
    double p = static_cast<double>(c) / total;
    acc -= p * p;
  }
  return acc;
}

inline int majority_class(const std::vector<int>& counts) {
  int best = 0;
  for (size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[static_cast<size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

inline int grow_rf_node(DecisionTree& tree, const Tensor<float>& x, const std::vector<int>& y,
                        std::vector<int> idx, const RFConfig& cfg, int n_classes, int max_features,
                        Rng& rng, int depth) {
  std::vector<int> counts(static_cast<size_t>(n_classes), 0);
  for (int i : idx) ++counts[static_cast<size_t>(y[static_cast<size_t>(i)])];
  int total = static_cast<int>(idx.size());
  double node_imp = gini(counts, total);

  auto make_leaf = [&]() {
    TreeNode nd;
    nd.leaf = majority_class(counts);
    tree.nodes.push_back(nd);
    return static_cast<int>(tree.nodes.size()) - 1;
  };
  if (total < cfg.min_samples_split || node_imp <= 0.0 || depth >= 64) return make_leaf();

  int d = x.dim(1);
  // sample max_features distinct feature indices, then scan them in order
  std::vector<int> feats(static_cast<size_t>(d));
  std::iota(feats.begin(), feats.end(), 0);
  for (int i = 0; i < max_features; ++i) {
    std::uniform_int_distribution<int> pick(i, d - 1);
    std::swap(feats[static_cast<size_t>(i)], feats[static_cast<size_t>(pick(rng))]);
  }
  feats.resize(static_cast<size_t>(max_features));
  std::sort(feats.begin(), feats.end());

  double best_gain = 1e-12;
  int best_feature = -1;
  double best_threshold = 0;
  std::vector<std::pair<float, int>> order(idx.size());
  std::vector<int> lc(static_cast<size_t>(n_classes));
  for (int f : feats) {
    for (size_t i = 0; i < idx.size(); ++i) order[i] = {x(idx[i], f), idx[i]};
    std::sort(order.begin(), order.end());
    std::fill(lc.begin(), lc.end(), 0);
    for (size_t p = 0; p + 1 < order.size(); ++p) {
      ++lc[static_cast<size_t>(y[static_cast<size_t>(order[p].second)])];
      if (order[p].first == order[p + 1].first) continue;
      int nl = static_cast<int>(p) + 1, nr = total - nl;
      if (nl < cfg.min_samples_leaf || nr < cfg.min_samples_leaf) continue;
      std::vector<int> rc(static_cast<size_t>(n_classes));
      for (int c = 0; c < n_classes; ++c) rc[static_cast<size_t>(c)] = counts[static_cast<size_t>(c)] - lc[static_cast<size_t>(c)];
      double gain = node_imp - (nl * gini(lc, nl) + nr * gini(rc, nr)) / total;
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = f;
        best_threshold = (static_cast<double>(order[p].first) + order[p + 1].first) / 2.0;
      }
    }
  }
  if (best_feature < 0) return make_leaf();

  std::vector<int> left, right;
  for (int i : idx) (x(i, best_feature) < best_threshold ? left : right).push_back(i);
  idx.clear();
  idx.shrink_to_fit();
  TreeNode nd;
  nd.feature = best_feature;
  nd.threshold = best_threshold;
  tree.nodes.push_back(nd);
  int self = static_cast<int>(tree.nodes.size()) - 1;
  int l = grow_rf_node(tree, x, y, std::move(left), cfg, n_classes, max_features, rng, depth + 1);
  int r = grow_rf_node(tree, x, y, std::move(right), cfg, n_classes, max_features, rng, depth + 1);
  tree.nodes[static_cast<size_t>(self)].left = l;
  tree.nodes[static_cast<size_t>(self)].right = r;
  return self;
}

}  // namespace detail

inline RFModel rf_fit(const Tensor<float>& x, const std::vector<int>& y, RFConfig cfg = {},
                      int n_classes = kNumClasses) {
  detail::check_features(x);
  int n = x.dim(0);
  if (n < 2) throw ValueError("rf_fit: need at least 2 samples");
  if (static_cast<int>(y.size()) != n) throw ShapeError("rf_fit: labels do not match rows");
  for (int v : y) {
    if (v < 0 || v >= n_classes) throw ValueError(cat("rf_fit: label ", v, " out of range"));
  }
  RFModel model;
  model.config = cfg;
  model.n_classes = n_classes;
  model.n_features = x.dim(1);
  int max_features = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(x.dim(1)))));
  for (int t = 0; t < cfg.n_trees; ++t) {
    Rng rng = make_rng(derive_seed(cfg.seed, static_cast<uint64_t>(t)));
    std::vector<int> idx(static_cast<size_t>(n));
    if (cfg.bootstrap) {
      std::uniform_int_distribution<int> pick(0, n - 1);
      for (auto& i : idx) i = pick(rng);
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    DecisionTree tree;
    detail::grow_rf_node(tree, x, y, std::move(idx), cfg, n_classes, max_features, rng, 0);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline std::vector<int> rf_predict(const RFModel& model, const Tensor<float>& x) {
  detail::check_features(x);
  if (x.dim(1) != model.n_features) {
    throw ShapeError(cat("rf_predict: model expects ", model.n_features, " features"));
  }
  std::vector<int> out(static_cast<size_t>(x.dim(0)));
  std::vector<int> votes(static_cast<size_t>(model.n_classes));
  for (int i = 0; i < x.dim(0); ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& tree : model.trees) {
      ++votes[static_cast<size_t>(std::llround(tree.predict_one(&x(i, 0))))];
    }
    int best = 0;
    for (int c = 1; c < model.n_classes; ++c) {
      if (votes[static_cast<size_t>(c)] > votes[static_cast<size_t>(best)]) best = c;
    }
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON serialization (feature, threshold, children, leaf values + metadata)

inline nlohmann::json tree_to_json(const DecisionTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& nd : tree.nodes) {
    if (nd.is_leaf()) {
      nodes.push_back({{"leaf", nd.leaf}});
    } else {
      nodes.push_back(
          {{"feature", nd.feature}, {"threshold", nd.threshold}, {"left", nd.left}, {"right", nd.right}});
    }
  }
  return nodes;
}

inline DecisionTree tree_from_json(const nlohmann::json& j) {
  DecisionTree tree;
  for (const auto& n : j) {
    TreeNode nd;
    if (n.contains("leaf")) {
      nd.leaf = n.at("leaf").get<double>();
    } else {
      nd.feature = n.at("feature").get<int>();
      nd.threshold = n.at("threshold").get<double>();
      nd.left = n.at("left").get<int>();
      nd.right = n.at("right").get<int>();
    }
    tree.nodes.push_back(nd);
  }
  return tree;
}

inline nlohmann::json gbt_to_json(const GBTModel& m) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& round : m.rounds) {
    nlohmann::json per_class = nlohmann::json::array();
    for (const auto& tree : round) per_class.push_back(tree_to_json(tree));
    rounds.push_back(per_class);
  }
  return nlohmann::json{{"model_type", "gbt"},
                        {"preset", m.config.preset},
                        {"config",
                         {{"n_estimators", m.config.n_estimators},
                          {"learning_rate", m.config.learning_rate},
                          {"max_depth", m.config.max_depth},
                          {"min_samples_leaf", m.config.min_samples_leaf},
                          {"lambda", m.config.lambda}}},
                        {"n_classes", m.n_classes},
                        {"n_features", m.n_features},
                        {"base_score", m.base_score},
                        {"train_loss", m.train_loss},
                        {"rounds", rounds}};
}

inline GBTModel gbt_from_json(const nlohmann::json& j) {
  GBTModel m;
  m.config.preset = j.at("preset").get<std::string>();
  m.config.n_estimators = j.at("config").at("n_estimators").get<int>();
  m.config.learning_rate = j.at("config").at("learning_rate").get<double>();
  m.config.max_depth = j.at("config").at("max_depth").get<int>();
  m.config.min_samples_leaf = j.at("config").at("min_samples_leaf").get<int>();
  m.config.lambda = j.at("config").at("lambda").get<double>();
  m.n_classes = j.at("n_classes").get<int>();
  m.n_features = j.at("n_features").get<int>();
  m.base_score = j.at("base_score").get<double>();
  m.train_loss = j.at("train_loss").get<std::vector<double>>();
  for (const auto& round : j.at("rounds")) {
    std::vector<DecisionTree> trees;
    for (const auto& t : round) trees.push_back(tree_from_json(t));
    m.rounds.push_back(std::move(trees));
  }
  return m;
}

inline nlohmann::json rf_to_json(const RFModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
  return nlohmann::json{{"model_type", "rf"},
                        {"config",
                         {{"n_trees", m.config.n_trees},
                          {"bootstrap", m.config.bootstrap},
                          {"min_samples_split", m.config.min_samples_split},
                          {"min_samples_leaf", m.config.min_samples_leaf},
                          {"seed", m.config.seed}}},
                        {"n_classes", m.n_classes},
                        {"n_features", m.n_features},
                        {"trees", trees}};
}

inline RFModel rf_from_json(const nlohmann::json& j) {
  RFModel m;
  m.config.n_trees = j.at("config").at("n_trees").get<int>();
  m.config.bootstrap = j.at("config").at("bootstrap").get<bool>();
  m.config.min_samples_split = j.at("config").at("min_samples_split").get<int>();
  m.config.min_samples_leaf = j.at("config").at("min_samples_leaf").get<int>();
  m.config.seed = j.at("config").at("seed").get<uint64_t>();
  m.n_classes = j.at("n_classes").get<int>();
  m.n_features = j.at("n_features").get<int>();
  for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
  return m;
}

struct KNNModel {
  int k = 5;
  int n_classes = kNumClasses;
  Tensor<float> train_x;
  std::vector<int> train_y;
};

inline nlohmann::json knn_to_json(const KNNModel& m) {
  return nlohmann::json{{"model_type", "knn"},
                        {"k", m.k},
                        {"n_classes", m.n_classes},
                        {"shape", m.train_x.shape()},
                        {"x", m.train_x.vec()},
                        {"y", m.train_y}};
}

inline KNNModel knn_from_json(const nlohmann::json& j) {
  KNNModel m;
  m.k = j.at("k").get<int>();
  m.n_classes = j.at("n_classes").get<int>();
  Shape s = j.at("shape").get<Shape>();
  m.train_x = Tensor<float>(s, j.at("x").get<std::vector<float>>());
  m.train_y = j.at("y").get<std::vector<int>>();
  return m;
}

}  // namespace falldet
