#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "falldet/common.hpp"
#include "falldet/layers.hpp"
#include "falldet/tensor.hpp"

namespace falldet {

enum class OptimizerKind { SGD, Adam };

inline const char* optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::SGD ? "sgd" : "adam";
}

inline OptimizerKind optimizer_from_name(const std::string& s) {
  if (s == "sgd") return OptimizerKind::SGD;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError(cat("unknown optimizer '", s, "' (expected sgd or adam)"));
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double l2 = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Owns the per-parameter moment state; one instance per network being
/// trained. Gradients are zeroed after every step.
template <typename T>
class Optimizer {
public:
  Optimizer(OptimizerConfig cfg, const std::vector<ParamRef<T>>& params) : cfg_(cfg) {
    if (cfg_.kind == OptimizerKind::Adam) {
      m_.reserve(params.size());
      v_.reserve(params.size());
      for (const auto& p : params) {
        m_.emplace_back(p.value->shape());
        v_.emplace_back(p.value->shape());
      }
    }
  }

  long long step_count() const { return t_; }

  void step(const std::vector<ParamRef<T>>& params) {
    if (cfg_.kind == OptimizerKind::Adam && params.size() != m_.size()) {
      throw ConfigError("optimizer was created for a different parameter set");
    }
    ++t_;
    for (size_t pi = 0; pi < params.size(); ++pi) {
      Tensor<T>& w = *params[pi].value;
      Tensor<T>& g = *params[pi].grad;
      if (!w.same_shape(g)) {
        throw ShapeError(cat(params[pi].name, ": gradient shape ", shape_str(g.shape()),
                             " does not match weight shape ", shape_str(w.shape())));
      }
      for (long long i = 0; i < g.size(); ++i) {
        if (!std::isfinite(static_cast<double>(g[i]))) {
          throw DivergenceError(cat("non-finite gradient in ", params[pi].name));
        }
      }
      if (cfg_.kind == OptimizerKind::SGD) {
        for (long long i = 0; i < w.size(); ++i) {
          w[i] -= static_cast<T>(cfg_.lr * (static_cast<double>(g[i]) + cfg_.l2 * w[i]));
        }
      } else {
        Tensor<T>& m = m_[pi];
        Tensor<T>& v = v_[pi];
        double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (long long i = 0; i < w.size(); ++i) {
          double gi = static_cast<double>(g[i]) + cfg_.l2 * w[i];
          double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
          double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
          m[i] = static_cast<T>(mi);
          v[i] = static_cast<T>(vi);
          w[i] -= static_cast<T>(cfg_.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.epsilon));
        }
      }
      g.fill(T(0));
    }
  }

private:
  OptimizerConfig cfg_;
  long long t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace falldet
