#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "falldet/common.hpp"
#include "falldet/loss.hpp"
#include "falldet/network.hpp"

namespace falldet {

struct GradCheckOptions {
  double step = 1e-5;  // central-difference step
  /// Coordinates checked per parameter tensor; <=0 means every coordinate.
  /// Sampling keeps full-architecture checks tractable (a Dense(2000) layer
  /// alone has >10^5 weights, each costing two forward passes).
  int max_coords_per_tensor = 0;
  uint64_t sample_seed = 0;
  /// Central differences of a loss near 2.5 carry ~1e-10 of rounding noise at
  /// step 1e-5, so a coordinate whose true gradient is smaller than that
  /// cannot be ratio-tested in double precision. When this floor is positive,
  /// coordinates with both sides below it are only required to agree to the
  /// floor; 0 applies the ratio everywhere.
  double zero_grad_floor = 0.0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  long long worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  long long coords_checked = 0;
  long long coords_below_floor = 0;
};

/// Compare backprop gradients against central finite differences of the
/// cross-entropy loss. Run on a double-precision network, with dropout masks
/// frozen and batchnorm in train mode on the fixed batch.
///
/// The numeric side touches only the forward pass, so it is an independent
/// oracle for the backward implementations.
inline GradCheckResult grad_check(Network<double>& net, const std::vector<Tensor<double>>& inputs,
                                  const std::vector<int>& labels,
                                  const GradCheckOptions& opts = {}) {
  net.set_mask_frozen(true);

  auto eval_loss = [&]() {
    Tensor<double> logits = net.forward_logits(inputs, Mode::Train);
    return static_cast<double>(softmax_cross_entropy(logits, labels).loss);
  };

  // Analytic pass.
  Tensor<double> logits = net.forward_logits(inputs, Mode::Train);
  auto loss = softmax_cross_entropy(logits, labels);
  for (auto& p : net.params()) p.grad->fill(0.0);
  net.backward_from_logits(loss.grad_logits);

  GradCheckResult result;
  Rng sample_rng = make_rng(opts.sample_seed);
  for (auto& p : net.params()) {
    Tensor<double>& w = *p.value;
    Tensor<double>& g = *p.grad;
    std::vector<long long> coords;
    if (opts.max_coords_per_tensor > 0 && w.size() > opts.max_coords_per_tensor) {
      std::vector<long long> all(static_cast<size_t>(w.size()));
      for (long long i = 0; i < w.size(); ++i) all[static_cast<size_t>(i)] = i;
      std::shuffle(all.begin(), all.end(), sample_rng);
      coords.assign(all.begin(), all.begin() + opts.max_coords_per_tensor);
    } else {
      coords.resize(static_cast<size_t>(w.size()));
      for (long long i = 0; i < w.size(); ++i) coords[static_cast<size_t>(i)] = i;
    }
    for (long long i : coords) {
      double orig = w[i];
      w[i] = orig + opts.step;
      double up = eval_loss();
      w[i] = orig - opts.step;
      double down = eval_loss();
      w[i] = orig;
      double numeric = (up - down) / (2.0 * opts.step);
      double analytic = g[i];
      ++result.coords_checked;
      if (opts.zero_grad_floor > 0 &&
          std::max(std::abs(analytic), std::abs(numeric)) < opts.zero_grad_floor) {
        ++result.coords_below_floor;  // both sides agree the gradient is ~zero
        continue;
      }
      double rel = std::abs(analytic - numeric) /
                   std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p.name;
        result.worst_index = i;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }

  // Restore the state the analytic gradients describe.
  for (auto& p : net.params()) p.grad->fill(0.0);
  net.set_mask_frozen(false);
  return result;
}

}  // namespace falldet
