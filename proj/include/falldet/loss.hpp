#pragma once

#include <cmath>
#include <vector>

#include "falldet/common.hpp"
#include "falldet/tensor.hpp"

namespace falldet {

template <typename T>
struct LossResult {
  T loss = 0;
  Tensor<T> grad_logits;  // (softmax - onehot) / batch
  Tensor<T> probs;
};

/// Mean negative log-likelihood of the true class under the softmax of the
/// logits. Stable log-sum-exp evaluation; gradient is exact, not numeric.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) {
    throw ShapeError(cat("softmax_cross_entropy: logits must be (batch, classes), got ",
                         shape_str(logits.shape())));
  }
  int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw ShapeError(cat("softmax_cross_entropy: ", labels.size(), " labels for batch of ", n));
  }
  LossResult<T> out;
  out.grad_logits = Tensor<T>({n, k});
  out.probs = Tensor<T>({n, k});
  double total = 0;
  for (int i = 0; i < n; ++i) {
    int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= k) {
      throw ValueError(cat("softmax_cross_entropy: label ", y, " out of range [0,", k, ") at row ", i));
    }
    const T* row = logits.data() + static_cast<size_t>(i) * k;
    T mx = row[0];
    for (int j = 0; j < k; ++j) {
      if (!std::isfinite(static_cast<double>(row[j]))) {
        throw ValueError(cat("softmax_cross_entropy: non-finite logit at row ", i, ", class ", j));
      }
      mx = std::max(mx, row[j]);
    }
    double denom = 0;
    for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
    total += std::log(denom) - static_cast<double>(row[y] - mx);
    for (int j = 0; j < k; ++j) {
      double p = std::exp(static_cast<double>(row[j] - mx)) / denom;
      out.probs(i, j) = static_cast<T>(p);
      out.grad_logits(i, j) = static_cast<T>((p - (j == y ? 1.0 : 0.0)) / n);
    }
  }
  out.loss = static_cast<T>(total / n);
  return out;
}

}  // namespace falldet
