#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "falldet/common.hpp"
#include "falldet/tensor.hpp"

namespace falldet {

enum class Mode { Train, Infer };

enum class LayerKind {
  Dense,
  Conv2D,
  Conv1D,
  MaxPool2D,
  MaxPool1D,
  BatchNorm,
  Dropout,
  Flatten,
  Concat,
  ReLU,
  Softmax,
};

inline const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::Conv1D: return "conv1d";
    case LayerKind::MaxPool2D: return "maxpool2d";
    case LayerKind::MaxPool1D: return "maxpool1d";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Concat: return "concat";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

/// Declarative description of one layer. Construction validates the full
/// parameter set for the kind; anything missing or out of range throws.
struct LayerSpec {
  LayerKind kind = LayerKind::Flatten;
  int units = 0;                   // Dense
  int filters = 0;                 // Conv2D / Conv1D
  int kernel_h = 0, kernel_w = 0;  // Conv2D (Conv1D uses kernel_w)
  int pool_h = 0, pool_w = 0;      // MaxPool2D (MaxPool1D uses pool_w)
  double rate = 0.0;               // Dropout
  double epsilon = 1e-5;           // BatchNorm
  double momentum = 0.9;           // BatchNorm running-stat update

  static LayerSpec dense(int units) {
    if (units < 1) throw ValueError(cat("dense: units must be >= 1, got ", units));
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.units = units;
    return s;
  }

  static LayerSpec conv2d(int filters, int kernel_h, int kernel_w) {
    if (filters < 1 || kernel_h < 1 || kernel_w < 1) {
      throw ValueError(cat("conv2d: invalid parameters (filters=", filters, ", kernel=", kernel_h,
                           "x", kernel_w, ")"));
    }
    LayerSpec s;
    s.kind = LayerKind::Conv2D;
    s.filters = filters;
    s.kernel_h = kernel_h;
    s.kernel_w = kernel_w;
    return s;
  }

  static LayerSpec conv1d(int filters, int kernel) {
    if (filters < 1 || kernel < 1) {
      throw ValueError(cat("conv1d: invalid parameters (filters=", filters, ", kernel=", kernel, ")"));
    }
    LayerSpec s;
    s.kind = LayerKind::Conv1D;
    s.filters = filters;
    s.kernel_w = kernel;
    return s;
  }

  static LayerSpec maxpool2d(int pool_h, int pool_w) {
    if (pool_h < 1 || pool_w < 1) {
      throw ValueError(cat("maxpool2d: pool size must be >= 1, got ", pool_h, "x", pool_w));
    }
    LayerSpec s;
    s.kind = LayerKind::MaxPool2D;
    s.pool_h = pool_h;
    s.pool_w = pool_w;
    return s;
  }

  static LayerSpec maxpool1d(int pool) {
    if (pool < 1) throw ValueError(cat("maxpool1d: pool size must be >= 1, got ", pool));
    LayerSpec s;
    s.kind = LayerKind::MaxPool1D;
    s.pool_w = pool;
    return s;
  }

  static LayerSpec batchnorm(double epsilon = 1e-5, double momentum = 0.9) {
    if (!(epsilon > 0)) throw ValueError("batchnorm: epsilon must be positive");
    if (!(momentum >= 0 && momentum < 1)) throw ValueError("batchnorm: momentum must be in [0,1)");
    LayerSpec s;
    s.kind = LayerKind::BatchNorm;
    s.epsilon = epsilon;
    s.momentum = momentum;
    return s;
  }

  static LayerSpec dropout(double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) {
      throw ValueError(cat("dropout: rate must be in [0,1), got ", rate));
    }
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.rate = rate;
    return s;
  }

  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
  }

  static LayerSpec relu() {
    LayerSpec s;
    s.kind = LayerKind::ReLU;
    return s;
  }

  static LayerSpec softmax() {
    LayerSpec s;
    s.kind = LayerKind::Softmax;
    return s;
  }

  static LayerSpec concat() {
    LayerSpec s;
    s.kind = LayerKind::Concat;
    return s;
  }

  std::string describe() const {
    switch (kind) {
      case LayerKind::Dense: return cat("dense(", units, ")");
      case LayerKind::Conv2D: return cat("conv2d(", filters, ",", kernel_h, "x", kernel_w, ")");
      case LayerKind::Conv1D: return cat("conv1d(", filters, ",", kernel_w, ")");
      case LayerKind::MaxPool2D: return cat("maxpool2d(", pool_h, "x", pool_w, ")");
      case LayerKind::MaxPool1D: return cat("maxpool1d(", pool_w, ")");
      case LayerKind::BatchNorm: return "batchnorm";
      case LayerKind::Dropout: return cat("dropout(", rate, ")");
      case LayerKind::Flatten: return "flatten";
      case LayerKind::Concat: return "concat";
      case LayerKind::ReLU: return "relu";
      case LayerKind::Softmax: return "softmax";
    }
    return "?";
  }
};

/// Symbolic shape calculator: per-sample output shape as a pure function of
/// (spec, per-sample input shape). Valid padding throughout; conv stride 1,
/// pooling stride equal to the pool size.
inline Shape layer_output_shape(const LayerSpec& spec, const Shape& in) {
  auto need_rank = [&](int r, const char* what) {
    if (static_cast<int>(in.size()) != r) {
      throw ShapeError(cat(spec.describe(), " expects ", what, " input, got ", shape_str(in)));
    }
  };
  switch (spec.kind) {
    case LayerKind::Dense:
      need_rank(1, "a vector per batch row");
      return {spec.units};
    case LayerKind::Conv2D: {
      need_rank(3, "channels x H x W");
      int oh = in[1] - spec.kernel_h + 1;
      int ow = in[2] - spec.kernel_w + 1;
      if (oh < 1 || ow < 1) {
        throw ShapeError(cat(spec.describe(), ": kernel does not fit input ", shape_str(in)));
      }
      return {spec.filters, oh, ow};
    }
    case LayerKind::Conv1D: {
      need_rank(2, "channels x L");
      int ol = in[1] - spec.kernel_w + 1;
      if (ol < 1) throw ShapeError(cat(spec.describe(), ": kernel does not fit input ", shape_str(in)));
      return {spec.filters, ol};
    }
    case LayerKind::MaxPool2D: {
      need_rank(3, "channels x H x W");
      if (in[1] < spec.pool_h || in[2] < spec.pool_w) {
        throw ShapeError(cat(spec.describe(), ": window does not fit input ", shape_str(in)));
      }
      return {in[0], (in[1] - spec.pool_h) / spec.pool_h + 1, (in[2] - spec.pool_w) / spec.pool_w + 1};
    }
    case LayerKind::MaxPool1D: {
      need_rank(2, "channels x L");
      if (in[1] < spec.pool_w) {
        throw ShapeError(cat(spec.describe(), ": window does not fit input ", shape_str(in)));
      }
      return {in[0], (in[1] - spec.pool_w) / spec.pool_w + 1};
    }
    case LayerKind::BatchNorm:
      if (in.empty()) throw ShapeError("batchnorm: empty input shape");
      return in;
    case LayerKind::Dropout:
    case LayerKind::ReLU:
      return in;
    case LayerKind::Softmax:
      need_rank(1, "a vector per batch row");
      return in;
    case LayerKind::Flatten:
      return {static_cast<int>(shape_numel(in))};
    case LayerKind::Concat:
      throw ShapeError("concat is resolved at the network level, not as a standalone layer");
  }
  throw ShapeError("unknown layer kind");
}

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

template <typename T>
struct BufferRef {
  std::string name;
  Tensor<T>* value = nullptr;
};

template <typename T>
void glorot_uniform_fill(Tensor<T>& w, int fan_in, int fan_out, Rng& rng) {
  double a = std::sqrt(6.0 / (static_cast<double>(fan_in) + static_cast<double>(fan_out)));
  std::uniform_real_distribution<double> dist(-a, a);
  for (auto& v : w.vec()) v = static_cast<T>(dist(rng));
}

/// One layer: spec + state (weights, gradients, caches). Forward in Train
/// mode caches whatever backward needs; backward consumes the cache.
template <typename T>
class Layer {
public:
  explicit Layer(LayerSpec spec) : spec_(spec) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }
  const Shape& input_shape() const { return in_shape_; }
  const Shape& output_shape() const { return out_shape_; }

  void init(const Shape& per_sample_input, Rng& rng) {
    in_shape_ = per_sample_input;
    try {
      out_shape_ = layer_output_shape(spec_, per_sample_input);
    } catch (const ShapeError& e) {
      throw ShapeError(cat(name_, ": ", e.what()));
    }
    init_params(rng);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    check_batched(x, in_shape_, "input");
    Tensor<T> y = do_forward(x, mode);
    has_cache_ = (mode == Mode::Train);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    if (!has_cache_) {
      throw Error(cat(name_, ": backward called without a preceding train-mode forward"));
    }
    check_batched(gy, out_shape_, "upstream gradient");
    has_cache_ = false;  // cache is stale once consumed
    return do_backward(gy);
  }

  virtual std::vector<ParamRef<T>> params() { return {}; }
  virtual std::vector<BufferRef<T>> buffers() { return {}; }

  /// Dropout-only hook: freeze the current mask for finite-difference runs.
  virtual void set_mask_frozen(bool) {}

protected:
  virtual void init_params(Rng&) {}
  virtual Tensor<T> do_forward(const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> do_backward(const Tensor<T>& gy) = 0;

  void check_batched(const Tensor<T>& t, const Shape& per_sample, const char* what) const {
    bool ok = t.rank() == static_cast<int>(per_sample.size()) + 1;
    if (ok) {
      for (size_t i = 0; i < per_sample.size(); ++i) {
        ok = ok && t.shape()[i + 1] == per_sample[i];
      }
    }
    if (!ok) {
      throw ShapeError(cat(name_, ": ", what, " shape ", shape_str(t.shape()),
                           " does not match expected (N,", shape_str(per_sample).substr(1)));
    }
  }

  LayerSpec spec_;
  std::string name_;
  Shape in_shape_;
  Shape out_shape_;
  bool has_cache_ = false;
};

template <typename T>
class DenseLayer final : public Layer<T> {
public:
  using Layer<T>::Layer;

  std::vector<ParamRef<T>> params() override {
    return {{this->name_ + ".weight", &w_, &gw_}, {this->name_ + ".bias", &b_, &gb_}};
  }

protected:
  void init_params(Rng& rng) override {
    int in = this->in_shape_[0];
    int out = this->spec_.units;
    w_ = Tensor<T>({in, out});
    b_ = Tensor<T>({out});
    gw_ = Tensor<T>({in, out});
    gb_ = Tensor<T>({out});
    glorot_uniform_fill(w_, in, out, rng);
  }

  Tensor<T> do_forward(const Tensor<T>& x, Mode mode) override {
    int n = x.dim(0), in = this->in_shape_[0], out = this->spec_.units;
    Tensor<T> y({n, out});
    for (int i = 0; i < n; ++i) {
      T* yr = y.data() + static_cast<size_t>(i) * out;
      for (int o = 0; o < out; ++o) yr[o] = b_[o];
      const T* xr = x.data() + static_cast<size_t>(i) * in;
      for (int k = 0; k < in; ++k) {
        T a = xr[k];
        const T* wr = w_.data() + static_cast<size_t>(k) * out;
        for (int o = 0; o < out; ++o) yr[o] += a * wr[o];
      }
    }
    if (mode == Mode::Train) x_ = x;
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& gy) override {
    int n = gy.dim(0), in = this->in_shape_[0], out = this->spec_.units;
    Tensor<T> gx({n, in});
    for (int i = 0; i < n; ++i) {
      const T* gr = gy.data() + static_cast<size_t>(i) * out;
      const T* xr = x_.data() + static_cast<size_t>(i) * in;
      for (int k = 0; k < in; ++k) {
        T a = xr[k];
        T* gwr = gw_.data() + static_cast<size_t>(k) * out;
        const T* wr = w_.data() + static_cast<size_t>(k) * out;
        T acc = 0;
        for (int o = 0; o < out; ++o) {
          gwr[o] += a * gr[o];
          acc += gr[o] * wr[o];
        }
        gx(i, k) = acc;
      }
      for (int o = 0; o < out; ++o) gb_[o] += gr[o];
    }
    return gx;
  }

private:
  Tensor<T> w_, b_, gw_, gb_, x_;
};

template <typename T>
class Conv2DLayer final : public Layer<T> {
public:
  using Layer<T>::Layer;

  std::vector<ParamRef<T>> params() override {
    return {{this->name_ + ".weight", &w_, &gw_}, {this->name_ + ".bias", &b_, &gb_}};
  }

protected:
  void init_params(Rng& rng) override {
    int c = this->in_shape_[0], f = this->spec_.filters;
    int kh = this->spec_.kernel_h, kw = this->spec_.kernel_w;
    w_ = Tensor<T>({f, c, kh, kw});
    b_ = Tensor<T>({f});
    gw_ = Tensor<T>({f, c, kh, kw});
    gb_ = Tensor<T>({f});
    glorot_uniform_fill(w_, c * kh * kw, f * kh * kw, rng);
  }

  Tensor<T> do_forward(const Tensor<T>& x, Mode mode) override {
    int n = x.dim(0), c = this->in_shape_[0], h = this->in_shape_[1], w = this->in_shape_[2];
    int f = this->spec_.filters, kh = this->spec_.kernel_h, kw = this->spec_.kernel_w;
    int oh = this->out_shape_[1], ow = this->out_shape_[2];
    Tensor<T> y({n, f, oh, ow});
    for (int i = 0; i < n; ++i) {
      for (int fo = 0; fo < f; ++fo) {
        T* plane = &y(i, fo, 0, 0);
        T bias = b_[fo];
        for (int p = 0; p < oh * ow; ++p) plane[p] = bias;
        for (int ci = 0; ci < c; ++ci) {
          for (int a = 0; a < kh; ++a) {
            for (int bcol = 0; bcol < kw; ++bcol) {
              T wv = w_(fo, ci, a, bcol);
              for (int r = 0; r < oh; ++r) {
                const T* xr = &x(i, ci, r + a, bcol);
                T* yr = plane + static_cast<size_t>(r) * ow;
                for (int q = 0; q < ow; ++q) yr[q] += wv * xr[q];
              }
            }
          }
        }
      }
    }
    (void)h;
    (void)w;
    if (mode == Mode::Train) x_ = x;
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& gy) override {
    int n = gy.dim(0), c = this->in_shape_[0];
    int f = this->spec_.filters, kh = this->spec_.kernel_h, kw = this->spec_.kernel_w;
    int oh = this->out_shape_[1], ow = this->out_shape_[2];
    Tensor<T> gx({n, c, this->in_shape_[1], this->in_shape_[2]});
    for (int i = 0; i < n; ++i) {
      for (int fo = 0; fo < f; ++fo) {
        const T* gplane = &gy(i, fo, 0, 0);
        T gb_acc = 0;
        for (int p = 0; p < oh * ow; ++p) gb_acc += gplane[p];
        gb_[fo] += gb_acc;
        for (int ci = 0; ci < c; ++ci) {
          for (int a = 0; a < kh; ++a) {
            for (int bcol = 0; bcol < kw; ++bcol) {
              T wv = w_(fo, ci, a, bcol);
              T gw_acc = 0;
              for (int r = 0; r < oh; ++r) {
                const T* xr = &x_(i, ci, r + a, bcol);
                T* gxr = &gx(i, ci, r + a, bcol);
                const T* gr = gplane + static_cast<size_t>(r) * ow;
                for (int q = 0; q < ow; ++q) {
                  gw_acc += xr[q] * gr[q];
                  gxr[q] += wv * gr[q];
                }
              }
              gw_(fo, ci, a, bcol) += gw_acc;
            }
          }
        }
      }
    }
    return gx;
  }

private:
  Tensor<T> w_, b_, gw_, gb_, x_;
};

template <typename T>
class Conv1DLayer final : public Layer<T> {
public:
  using Layer<T>::Layer;

  std::vector<ParamRef<T>> params() override {
    return {{this->name_ + ".weight", &w_, &gw_}, {this->name_ + ".bias", &b_, &gb_}};
  }

protected:
  void init_params(Rng& rng) override {
    int c = this->in_shape_[0], f = this->spec_.filters, k = this->spec_.kernel_w;
    w_ = Tensor<T>({f, c, k});
    b_ = Tensor<T>({f});
    gw_ = Tensor<T>({f, c, k});
    gb_ = Tensor<T>({f});
    glorot_uniform_fill(w_, c * k, f * k, rng);
  }

  Tensor<T> do_forward(const Tensor<T>& x, Mode mode) override {
    int n = x.dim(0), c = this->in_shape_[0];
    int f = this->spec_.filters, k = this->spec_.kernel_w, ol = this->out_shape_[1];
    Tensor<T> y({n, f, ol});
    for (int i = 0; i < n; ++i) {
      for (int fo = 0; fo < f; ++fo) {
        T* yr = &y(i, fo, 0);
        for (int p = 0; p < ol; ++p) yr[p] = b_[fo];
        for (int ci = 0; ci < c; ++ci) {
          for (int a = 0; a < k; ++a) {
            T wv = w_(fo, ci, a);
            const T* xr = &x(i, ci, a);
            for (int p = 0; p < ol; ++p) yr[p] += wv * xr[p];
          }
        }
      }
    }
    if (mode == Mode::Train) x_ = x;
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& gy) override {
    int n = gy.dim(0), c = this->in_shape_[0];
    int f = this->spec_.filters, k = this->spec_.kernel_w, ol = this->out_shape_[1];
    Tensor<T> gx({n, c, this->in_shape_[1]});
    for (int i = 0; i < n; ++i) {
      for (int fo = 0; fo < f; ++fo) {
        const T* gr = &gy(i, fo, 0);
        T acc_b = 0;
        for (int p = 0; p < ol; ++p) acc_b += gr[p];
        gb_[fo] += acc_b;
        for (int ci = 0; ci < c; ++ci) {
          for (int a = 0; a < k; ++a) {
            T wv = w_(fo, ci, a);
            const T* xr = &x_(i, ci, a);
            T* gxr = &gx(i, ci, a);
            T acc_w = 0;
            for (int p = 0; p < ol; ++p) {
              acc_w += xr[p] * gr[p];
              gxr[p] += wv * gr[p];
            }
            gw_(fo, ci, a) += acc_w;
          }
        }
      }
    }
    return gx;
  }

private:
  Tensor<T> w_, b_, gw_, gb_, x_;
};

template <typename T>
class MaxPool2DLayer final : public Layer<T> {
public:
  using Layer<T>::Layer;

protected:
  Tensor<T> do_forward(const Tensor<T>& x, Mode mode) override {
    int n = x.dim(0), c = this->in_shape_[0], h = this->in_shape_[1], w = this->in_shape_[2];
    int ph = this->spec_.pool_h, pw = this->spec_.pool_w;
    int oh = this->out_shape_[1], ow = this->out_shape_[2];
    Tensor<T> y({n, c, oh, ow});
    argmax_.assign(static_cast<size_t>(y.size()), 0);
    size_t oidx = 0;
    for (int i = 0; i < n; ++i) {
      for (int ci = 0; ci < c; ++ci) {
        for (int r = 0; r < oh; ++r) {
          for (int q = 0; q < ow; ++q, ++oidx) {
            int r0 = r * ph, q0 = q * pw;
            T best = x(i, ci, r0, q0);
            long long best_at = (((static_cast<long long>(i) * c + ci) * h) + r0) * w + q0;
            for (int a = 0; a < ph; ++a) {
              for (int b = 0; b < pw; ++b) {
                T v = x(i, ci, r0 + a, q0 + b);
                if (v > best) {  // first maximum wins ties
                  best = v;
                  best_at = (((static_cast<long long>(i) * c + ci) * h) + r0 + a) * w + q0 + b;
                }
              }
            }
            y[static_cast<long long>(oidx)] = best;
            argmax_[oidx] = best_at;
          }
        }
      }
    }
    if (mode != Mode::Train) argmax_.clear();
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& gy) override {
    Tensor<T> gx({gy.dim(0), this->in_shape_[0], this->in_shape_[1], this->in_shape_[2]});
    for (long long i = 0; i < gy.size(); ++i) gx[argmax_[static_cast<size_t>(i)]] += gy[i];
    return gx;
  }

private:
  std::vector<long long> argmax_;
};

template <typename T>
class MaxPool1DLayer final : public Layer<T> {
public:
  using Layer<T>::Layer;

protected:
  Tensor<T> do_forward(const Tensor<T>& x, Mode mode) override {
    int n = x.dim(0), c = this->in_shape_[0], l = this->in_shape_[1];
    int p = this->spec_.pool_w, ol = this->out_shape_[1];
    Tensor<T> y({n, c, ol});
    argmax_.assign(static_cast<size_t>(y.size()), 0);
    size_t oidx = 0;
    for (int i = 0; i < n; ++i) {
      for (int ci = 0; ci < c; ++ci) {
        for (int q = 0; q < ol; ++q, ++oidx) {
          int q0 = q * p;
          T best = x(i, ci, q0);
          long long best_at = (static_cast<long long>(i) * c + ci) * l + q0;
          for (int a = 1; a < p; ++a) {
            T v = x(i, ci, q0 + a);
            if (v > best) {
              best = v;
              best_at = (static_cast<long long>(i) * c + ci) * l + q0 + a;
            }
          }
          y[static_cast<long long>(oidx)] = best;
          argmax_[oidx] = best_at;
        }
      }
    }
    if (mode != Mode::Train) argmax_.clear();
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& gy) override {
    Tensor<T> gx({gy.dim(0), this->in_shape_[0], this->in_shape_[1]});
    for (long long i = 0; i < gy.size(); ++i) gx[argmax_[static_cast<size_t>(i)]] += gy[i];
    return gx;
  }

private:
  std::vector<long long> argmax_;
};

/// Normalizes over the leading per-sample dimension (features for rank-1
/// samples, channels for conv tensors). Batch statistics in train mode,
/// running statistics in infer mode; running stats update only in train mode.
template <typename T>
class BatchNormLayer final : public Layer<T> {
public:
  using Layer<T>::Layer;

  std::vector<ParamRef<T>> params() override {
    return {{this->name_ + ".gamma", &gamma_, &ggamma_}, {this->name_ + ".beta", &beta_, &gbeta_}};
  }

  std::vector<BufferRef<T>> buffers() override {
    return {{this->name_ + ".running_mean", &running_mean_},
            {this->name_ + ".running_var", &running_var_}};
  }

protected:
  void init_params(Rng&) override {
    int c = this->in_shape_[0];
    gamma_ = Tensor<T>::full({c}, T(1));
    beta_ = Tensor<T>({c});
    ggamma_ = Tensor<T>({c});
    gbeta_ = Tensor<T>({c});
    running_mean_ = Tensor<T>({c});
    running_var_ = Tensor<T>::full({c}, T(1));
  }

  Tensor<T> do_forward(const Tensor<T>& x, Mode mode) override {
    int n = x.dim(0);
    int c = this->in_shape_[0];
    long long spatial = shape_numel(this->in_shape_) / c;
    Tensor<T> y(x.shape());
    if (mode == Mode::Train) {
      if (n < 2) {
        throw ValueError(cat(this->name_, ": batchnorm needs batch size >= 2 in train mode, got ", n));
      }
      double m = static_cast<double>(n) * static_cast<double>(spatial);
      xhat_ = Tensor<T>(x.shape());
      inv_std_.assign(static_cast<size_t>(c), T(0));
      for (int ci = 0; ci < c; ++ci) {
        double sum = 0, sq = 0;
        for (int i = 0; i < n; ++i) {
          const T* row = channel_ptr(x, i, ci, spatial);
          for (long long s = 0; s < spatial; ++s) {
            sum += row[s];
            sq += static_cast<double>(row[s]) * row[s];
          }
        }
        double mean = sum / m;
        double var = sq / m - mean * mean;
        if (var < 0) var = 0;  // numerical floor
        double inv = 1.0 / std::sqrt(var + this->spec_.epsilon);
        inv_std_[static_cast<size_t>(ci)] = static_cast<T>(inv);
        double mom = this->spec_.momentum;
        running_mean_[ci] = static_cast<T>(mom * running_mean_[ci] + (1 - mom) * mean);
        running_var_[ci] = static_cast<T>(mom * running_var_[ci] + (1 - mom) * var);
        T g = gamma_[ci], b = beta_[ci];
        for (int i = 0; i < n; ++i) {
          const T* row = channel_ptr(x, i, ci, spatial);
          T* hrow = channel_ptr(xhat_, i, ci, spatial);
          T* yrow = channel_ptr(y, i, ci, spatial);
          for (long long s = 0; s < spatial; ++s) {
            T h = static_cast<T>((row[s] - mean) * inv);
            hrow[s] = h;
            yrow[s] = g * h + b;
          }
        }
      }
    } else {
      for (int ci = 0; ci < c; ++ci) {
        T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_[ci]) + this->spec_.epsilon));
        T mean = running_mean_[ci];
        T g = gamma_[ci], b = beta_[ci];
        for (int i = 0; i < n; ++i) {
          const T* row = channel_ptr(x, i, ci, spatial);
          T* yrow = channel_ptr(y, i, ci, spatial);
          for (long long s = 0; s < spatial; ++s) yrow[s] = g * (row[s] - mean) * inv + b;
        }
      }
    }
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& gy) override {
    int n = gy.dim(0);
    int c = this->in_shape_[0];
    long long spatial = shape_numel(this->in_shape_) / c;
    double m = static_cast<double>(n) * static_cast<double>(spatial);
    Tensor<T> gx(gy.shape());
    for (int ci = 0; ci < c; ++ci) {
      double sum_gy = 0, sum_gy_xhat = 0;
      for (int i = 0; i < n; ++i) {
        const T* grow = channel_ptr(gy, i, ci, spatial);
        const T* hrow = channel_ptr(xhat_, i, ci, spatial);
        for (long long s = 0; s < spatial; ++s) {
          sum_gy += grow[s];
          sum_gy_xhat += static_cast<double>(grow[s]) * hrow[s];
        }
      }
      ggamma_[ci] += static_cast<T>(sum_gy_xhat);
      gbeta_[ci] += static_cast<T>(sum_gy);
      double scale = static_cast<double>(gamma_[ci]) * inv_std_[static_cast<size_t>(ci)];
      double mean_gy = sum_gy / m;
      double mean_gy_xhat = sum_gy_xhat / m;
      for (int i = 0; i < n; ++i) {
        const T* grow = channel_ptr(gy, i, ci, spatial);
        const T* hrow = channel_ptr(xhat_, i, ci, spatial);
        T* gxrow = channel_ptr(gx, i, ci, spatial);
        for (long long s = 0; s < spatial; ++s) {
          gxrow[s] = static_cast<T>(scale * (grow[s] - mean_gy - hrow[s] * mean_gy_xhat));
        }
      }
    }
    return gx;
  }

private:
  static T* channel_ptr(Tensor<T>& t, int i, int ci, long long spatial) {
    return t.data() + (static_cast<size_t>(i) * t.size() / t.dim(0)) + static_cast<size_t>(ci) * spatial;
  }
  static const T* channel_ptr(const Tensor<T>& t, int i, int ci, long long spatial) {
    return t.data() + (static_cast<size_t>(i) * t.size() / t.dim(0)) + static_cast<size_t>(ci) * spatial;
  }

  Tensor<T> gamma_, beta_, ggamma_, gbeta_, running_mean_, running_var_, xhat_;
  std::vector<T> inv_std_;
};

/// Inverted dropout: train mode scales survivors by 1/(1-rate), infer mode is
/// the identity. Backward reuses the exact mask of the matching forward.
template <typename T>
class DropoutLayer final : public Layer<T> {
public:
  using Layer<T>::Layer;

  void set_mask_frozen(bool frozen) override {
    frozen_ = frozen;
    if (!frozen) mask_ = Tensor<T>();
  }

protected:
  void init_params(Rng& rng) override { rng_ = make_rng(rng()); }

  Tensor<T> do_forward(const Tensor<T>& x, Mode mode) override {
    if (mode == Mode::Infer) return x;
    if (!frozen_ || mask_.size() != x.size()) {
      mask_ = Tensor<T>(x.shape());
      T keep_scale = static_cast<T>(1.0 / (1.0 - this->spec_.rate));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (long long i = 0; i < x.size(); ++i) {
        mask_[i] = (u(rng_) < this->spec_.rate) ? T(0) : keep_scale;
      }
    }
    Tensor<T> y(x.shape());
    for (long long i = 0; i < x.size(); ++i) y[i] = x[i] * mask_[i];
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& gy) override {
    Tensor<T> gx(gy.shape());
    for (long long i = 0; i < gy.size(); ++i) gx[i] = gy[i] * mask_[i];
    return gx;
  }

private:
  Rng rng_;
  Tensor<T> mask_;
  bool frozen_ = false;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
public:
  using Layer<T>::Layer;

protected:
  Tensor<T> do_forward(const Tensor<T>& x, Mode) override {
    return x.reshaped({x.dim(0), this->out_shape_[0]});
  }

  Tensor<T> do_backward(const Tensor<T>& gy) override {
    Shape s = this->in_shape_;
    s.insert(s.begin(), gy.dim(0));
    return gy.reshaped(s);
  }
};

template <typename T>
class ReLULayer final : public Layer<T> {
public:
  using Layer<T>::Layer;

protected:
  Tensor<T> do_forward(const Tensor<T>& x, Mode mode) override {
    Tensor<T> y(x.shape());
    for (long long i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    if (mode == Mode::Train) x_ = x;
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& gy) override {
    Tensor<T> gx(gy.shape());
    for (long long i = 0; i < gy.size(); ++i) gx[i] = x_[i] > T(0) ? gy[i] : T(0);
    return gx;
  }

private:
  Tensor<T> x_;
};

template <typename T>
class SoftmaxLayer final : public Layer<T> {
public:
  using Layer<T>::Layer;

protected:
  Tensor<T> do_forward(const Tensor<T>& x, Mode mode) override {
    int n = x.dim(0), k = this->in_shape_[0];
    Tensor<T> y({n, k});
    for (int i = 0; i < n; ++i) {
      const T* xr = x.data() + static_cast<size_t>(i) * k;
      T* yr = y.data() + static_cast<size_t>(i) * k;
      T mx = xr[0];
      for (int j = 1; j < k; ++j) mx = std::max(mx, xr[j]);
      double denom = 0;
      for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(xr[j] - mx));
      for (int j = 0; j < k; ++j) {
        yr[j] = static_cast<T>(std::exp(static_cast<double>(xr[j] - mx)) / denom);
      }
    }
    if (mode == Mode::Train) probs_ = y;
    return y;
  }

  Tensor<T> do_backward(const Tensor<T>& gy) override {
    int n = gy.dim(0), k = this->in_shape_[0];
    Tensor<T> gx({n, k});
    for (int i = 0; i < n; ++i) {
      const T* gr = gy.data() + static_cast<size_t>(i) * k;
      const T* pr = probs_.data() + static_cast<size_t>(i) * k;
      double dot = 0;
      for (int j = 0; j < k; ++j) dot += static_cast<double>(gr[j]) * pr[j];
      for (int j = 0; j < k; ++j) gx(i, j) = static_cast<T>(pr[j] * (gr[j] - dot));
    }
    return gx;
  }

private:
  Tensor<T> probs_;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::Dense: return std::make_unique<DenseLayer<T>>(spec);
    case LayerKind::Conv2D: return std::make_unique<Conv2DLayer<T>>(spec);
    case LayerKind::Conv1D: return std::make_unique<Conv1DLayer<T>>(spec);
    case LayerKind::MaxPool2D: return std::make_unique<MaxPool2DLayer<T>>(spec);
    case LayerKind::MaxPool1D: return std::make_unique<MaxPool1DLayer<T>>(spec);
    case LayerKind::BatchNorm: return std::make_unique<BatchNormLayer<T>>(spec);
    case LayerKind::Dropout: return std::make_unique<DropoutLayer<T>>(spec);
    case LayerKind::Flatten: return std::make_unique<FlattenLayer<T>>(spec);
    case LayerKind::ReLU: return std::make_unique<ReLULayer<T>>(spec);
    case LayerKind::Softmax: return std::make_unique<SoftmaxLayer<T>>(spec);
    case LayerKind::Concat:
      throw ConfigError("concat cannot be instantiated as a standalone layer");
  }
  throw ConfigError("unknown layer kind");
}

}  // namespace falldet
