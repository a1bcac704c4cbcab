#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "falldet/common.hpp"
#include "falldet/loss.hpp"
#include "falldet/metrics.hpp"
#include "falldet/network.hpp"
#include "falldet/optim.hpp"

namespace falldet {

struct TrainConfig {
  std::string optimizer = "adam";
  double lr = 1e-3;
  double l2 = 0.0;
  int batch_size = 64;
  int max_epochs = 30;
  int patience = 10;  // non-improving epochs tolerated before stopping
  std::string checkpoint_metric = "f1_weighted";  // or "accuracy"
  double stop_at_metric = std::numeric_limits<double>::infinity();  // early exit target
  uint64_t seed = 42;

  void validate() const {
    if (batch_size < 2) throw ConfigError("train: batch size must be >= 2 (batchnorm constraint)");
    if (patience < 0) throw ConfigError("train: patience must be >= 0");
    if (max_epochs < 1) throw ConfigError("train: max epochs must be >= 1");
    if (lr < 0) throw ConfigError("train: learning rate must be >= 0");
    if (checkpoint_metric != "f1_weighted" && checkpoint_metric != "accuracy") {
      throw ConfigError(cat("train: unknown checkpoint metric '", checkpoint_metric, "'"));
    }
    optimizer_from_name(optimizer);
  }

  OptimizerConfig optimizer_config() const {
    OptimizerConfig oc;
    oc.kind = optimizer_from_name(optimizer);
    oc.lr = lr;
    oc.l2 = l2;
    return oc;
  }
};

/// The prior-work preset: plain SGD, lr 0.001, L2 0.004, 5 epochs, batch 100.
inline TrainConfig baseline_cnn_train_config() {
  TrainConfig cfg;
  cfg.optimizer = "sgd";
  cfg.lr = 0.001;
  cfg.l2 = 0.004;
  cfg.batch_size = 100;
  cfg.max_epochs = 5;
  cfg.patience = 5;
  return cfg;
}

/// A model's view of a dataset: one (N,...) tensor per branch plus labels.
struct ModelData {
  std::vector<Tensor<float>> inputs;
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
  bool empty() const { return labels.empty(); }
};

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& t, const std::vector<int>& idx) {
  Shape s = t.shape();
  long long row = shape_numel(s) / s[0];
  s[0] = static_cast<int>(idx.size());
  Tensor<T> out(s);
  for (size_t i = 0; i < idx.size(); ++i) {
    const T* src = t.data() + static_cast<size_t>(idx[i]) * row;
    std::copy(src, src + row, out.data() + i * static_cast<size_t>(row));
  }
  return out;
}

struct Prediction {
  std::vector<int> labels;
  Tensor<float> probs;
};

/// Inference on a frozen model: dropout off, batchnorm running statistics,
/// argmax ties resolved to the smallest class index.
inline Prediction predict(Network<float>& net, const ModelData& data, int batch_size = 256) {
  int n = data.size();
  int k = net.output_shape()[0];
  Prediction out;
  out.labels.resize(static_cast<size_t>(n));
  out.probs = Tensor<float>({std::max(n, 1), k});
  for (int start = 0; start < n; start += batch_size) {
    int stop = std::min(n, start + batch_size);
    std::vector<int> idx(static_cast<size_t>(stop - start));
    std::iota(idx.begin(), idx.end(), start);
    std::vector<Tensor<float>> xs;
    xs.reserve(data.inputs.size());
    for (const auto& t : data.inputs) xs.push_back(gather_rows(t, idx));
    Tensor<float> probs = net.forward(xs, Mode::Infer);
    for (int i = 0; i < stop - start; ++i) {
      const float* row = probs.data() + static_cast<size_t>(i) * k;
      int best = 0;
      for (int j = 1; j < k; ++j) {
        if (row[j] > row[best]) best = j;
      }
      out.labels[static_cast<size_t>(start + i)] = best;
      std::copy(row, row + k, out.probs.data() + static_cast<size_t>(start + i) * k);
    }
  }
  return out;
}

inline EvalReport evaluate(Network<float>& net, const ModelData& data,
                           const std::string& config_tag = "", int batch_size = 256) {
  Prediction p = predict(net, data, batch_size);
  return report(ConfusionMatrix::from(data.labels, p.labels, net.output_shape()[0]), config_tag);
}

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;
  double val_accuracy = 0;
  double val_f1_weighted = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_metric = 0;
  int epochs_run = 0;
};

namespace detail {

template <typename T>
std::vector<Tensor<T>> snapshot_tensors(Network<T>& net) {
  std::vector<Tensor<T>> out;
  for (auto& p : net.params()) out.push_back(*p.value);
  for (auto& b : net.buffers()) out.push_back(*b.value);
  return out;
}

template <typename T>
void restore_tensors(Network<T>& net, const std::vector<Tensor<T>>& snap) {
  size_t i = 0;
  for (auto& p : net.params()) *p.value = snap[i++];
  for (auto& b : net.buffers()) *b.value = snap[i++];
}

}  // namespace detail

/// Mini-batch training with a seeded shuffle per epoch. After each epoch the
/// validation split is scored and the weights with the best checkpoint metric
/// are kept; with no validation data the final weights win. Batches smaller
/// than 2 (a trailing remainder row) are skipped to satisfy batchnorm.
inline TrainResult train(Network<float>& net, const ModelData& train_data,
                         const ModelData& val_data, const TrainConfig& cfg) {
  cfg.validate();
  if (train_data.empty()) throw ConfigError("train: empty training set");
  if (train_data.inputs.size() != net.n_branches()) {
    throw ShapeError(cat("train: model expects ", net.n_branches(), " inputs, data has ",
                         train_data.inputs.size()));
  }
  auto params = net.params();
  Optimizer<float> opt(cfg.optimizer_config(), params);
  Rng rng = make_rng(cfg.seed);

  TrainResult result;
  std::vector<Tensor<float>> best = detail::snapshot_tensors(net);
  double best_metric = -1;
  int best_epoch = -1;
  int since_best = 0;

  int n = train_data.size();
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    long long loss_count = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      int stop = std::min(n, start + cfg.batch_size);
      if (stop - start < 2) continue;
      std::vector<int> idx(order.begin() + start, order.begin() + stop);
      std::vector<Tensor<float>> xs;
      xs.reserve(train_data.inputs.size());
      for (const auto& t : train_data.inputs) xs.push_back(gather_rows(t, idx));
      std::vector<int> yb(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) yb[i] = train_data.labels[static_cast<size_t>(idx[i])];

      Tensor<float> logits = net.forward_logits(xs, Mode::Train);
      for (long long i = 0; i < logits.size(); ++i) {
        if (!std::isfinite(static_cast<double>(logits[i]))) {
          throw DivergenceError(cat("training diverged: non-finite logits at epoch ", epoch,
                                    ", batch ", start / cfg.batch_size));
        }
      }
      auto loss = softmax_cross_entropy(logits, yb);
      if (!std::isfinite(static_cast<double>(loss.loss))) {
        throw DivergenceError(cat("training loss became non-finite at epoch ", epoch, ", batch ",
                                  start / cfg.batch_size));
      }
      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(idx.size());
      loss_count += static_cast<long long>(idx.size());
      net.backward_from_logits(loss.grad_logits);
      opt.step(params);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;

    double metric;
    if (!val_data.empty()) {
      EvalReport r = evaluate(net, val_data);
      stats.val_accuracy = r.accuracy;
      stats.val_f1_weighted = r.weighted_f1;
      metric = cfg.checkpoint_metric == "accuracy" ? r.accuracy : r.weighted_f1;
    } else {
      metric = -stats.train_loss;  // keep latest-improving weights
    }
    result.history.push_back(stats);
    ++result.epochs_run;

    if (metric > best_metric) {
      best_metric = metric;
      best_epoch = epoch;
      best = detail::snapshot_tensors(net);
      since_best = 0;
    } else {
      ++since_best;
      if (since_best > cfg.patience) break;
    }
    if (metric >= cfg.stop_at_metric) break;
  }

  detail::restore_tensors(net, best);
  result.best_epoch = best_epoch;
  result.best_metric = best_metric;
  return result;
}

}  // namespace falldet
