#pragma once

#include <memory>
#include <string>
#include <vector>

#include "falldet/common.hpp"
#include "falldet/layers.hpp"
#include "falldet/tensor.hpp"

namespace falldet {

/// What a branch consumes; the experiment layer binds these slots to the
/// concrete arrays of a data configuration.
enum class BranchInput { SensorVector, SensorSequence, Camera };

inline const char* branch_input_name(BranchInput b) {
  switch (b) {
    case BranchInput::SensorVector: return "sensor";
    case BranchInput::SensorSequence: return "sensor-seq";
    case BranchInput::Camera: return "camera";
  }
  return "?";
}

/// Declarative description of a whole model: one ordered layer list per input
/// branch, plus the shared head applied after feature concatenation.
/// Single-input models have one branch and an empty head.
struct ModelSpec {
  std::string name;
  std::vector<std::vector<LayerSpec>> branches;
  std::vector<Shape> input_shapes;  // per-sample, parallel to branches
  std::vector<BranchInput> inputs;  // parallel to branches
  std::vector<LayerSpec> head;
  int n_classes = kNumClasses;

  void validate() const {
    if (branches.empty()) throw ConfigError(name + ": model needs at least one branch");
    if (branches.size() != input_shapes.size() || branches.size() != inputs.size()) {
      throw ConfigError(name + ": branches, input shapes and input kinds must align");
    }
    if (branches.size() > 1 && head.empty()) {
      throw ConfigError(name + ": multi-branch model needs a head after concatenation");
    }
  }

  /// Per-sample output shape of branch b (symbolic, no weights involved).
  Shape branch_output_shape(size_t b) const {
    Shape s = input_shapes[b];
    for (const auto& spec : branches[b]) s = layer_output_shape(spec, s);
    return s;
  }

  /// Width of the concatenated feature vector fed to the head.
  int concat_width() const {
    int w = 0;
    for (size_t b = 0; b < branches.size(); ++b) {
      Shape s = branch_output_shape(b);
      if (s.size() != 1) {
        throw ShapeError(cat(name, ": branch ", b, " output ", shape_str(s),
                             " is not a flat vector; branches must end flattened"));
      }
      w += s[0];
    }
    return w;
  }

  Shape output_shape() const {
    if (head.empty()) return branch_output_shape(0);
    Shape s = {concat_width()};
    for (const auto& spec : head) s = layer_output_shape(spec, s);
    return s;
  }
};

template <typename T>
class LayerSeq {
public:
  void build(const std::vector<LayerSpec>& specs, const Shape& per_sample_in,
             const std::string& prefix, Rng& rng) {
    layers_.clear();
    std::vector<int> kind_counts(16, 0);
    Shape s = per_sample_in;
    for (const auto& spec : specs) {
      auto layer = make_layer<T>(spec);
      int idx = kind_counts[static_cast<size_t>(spec.kind)]++;
      layer->set_name(cat(prefix, kind_name(spec.kind), idx));
      layer->init(s, rng);
      s = layer->output_shape();
      layers_.push_back(std::move(layer));
    }
    out_shape_ = s;
    in_shape_ = per_sample_in;
  }

  Tensor<T> forward(Tensor<T> x, Mode mode) {
    for (auto& l : layers_) x = l->forward(x, mode);
    return x;
  }

  /// Forward stopping before a trailing Softmax, so training and gradient
  /// checking can fuse softmax with the cross-entropy loss.
  Tensor<T> forward_logits(Tensor<T> x, Mode mode) {
    for (size_t i = 0; i + 1 < layers_.size(); ++i) x = layers_[i]->forward(x, mode);
    if (!layers_.empty() && layers_.back()->spec().kind != LayerKind::Softmax) {
      x = layers_.back()->forward(x, mode);
    }
    return x;
  }

  bool ends_in_softmax() const {
    return !layers_.empty() && layers_.back()->spec().kind == LayerKind::Softmax;
  }

  Tensor<T> backward(Tensor<T> gy, bool skip_trailing_softmax) {
    size_t start = layers_.size();
    if (skip_trailing_softmax && ends_in_softmax()) --start;
    for (size_t i = start; i-- > 0;) gy = layers_[i]->backward(gy);
    return gy;
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    for (auto& l : layers_) {
      for (auto& p : l->params()) out.push_back(p);
    }
    return out;
  }

  std::vector<BufferRef<T>> buffers() {
    std::vector<BufferRef<T>> out;
    for (auto& l : layers_) {
      for (auto& b : l->buffers()) out.push_back(b);
    }
    return out;
  }

  void set_mask_frozen(bool frozen) {
    for (auto& l : layers_) l->set_mask_frozen(frozen);
  }

  const Shape& output_shape() const { return out_shape_; }
  const Shape& input_shape() const { return in_shape_; }
  size_t size() const { return layers_.size(); }
  Layer<T>& layer(size_t i) { return *layers_[i]; }

private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  Shape in_shape_, out_shape_;
};

/// A built model: branch layer stacks whose flat outputs are concatenated and
/// fed through the head. Weight initialization order is fixed (branch 0..B,
/// then head), so a seed fully determines the initial weights.
template <typename T>
class Network {
public:
  Network() = default;

  static Network build(const ModelSpec& spec, uint64_t seed) {
    spec.validate();
    Network net;
    net.spec_ = spec;
    Rng rng = make_rng(seed);
    net.branches_.resize(spec.branches.size());
    for (size_t b = 0; b < spec.branches.size(); ++b) {
      net.branches_[b].build(spec.branches[b], spec.input_shapes[b],
                             spec.branches.size() > 1 ? cat("branch", b, ".") : "", rng);
    }
    net.branch_widths_.clear();
    if (!spec.head.empty()) {
      int w = 0;
      for (size_t b = 0; b < spec.branches.size(); ++b) {
        Shape s = net.branches_[b].output_shape();
        if (s.size() != 1) {
          throw ShapeError(cat(spec.name, ": branch ", b, " must end in a flat vector, got ",
                               shape_str(s)));
        }
        net.branch_widths_.push_back(s[0]);
        w += s[0];
      }
      net.head_.build(spec.head, {w}, "head.", rng);
    }
    return net;
  }

  const ModelSpec& spec() const { return spec_; }
  size_t n_branches() const { return branches_.size(); }

  Shape output_shape() const {
    return head_.size() ? head_.output_shape() : branches_[0].output_shape();
  }

  /// Full forward including any trailing softmax; returns (N, classes).
  Tensor<T> forward(const std::vector<Tensor<T>>& xs, Mode mode) {
    return run_forward(xs, mode, /*stop_at_logits=*/false);
  }

  /// Forward up to the logits (trailing softmax excluded).
  Tensor<T> forward_logits(const std::vector<Tensor<T>>& xs, Mode mode) {
    return run_forward(xs, mode, /*stop_at_logits=*/true);
  }

  /// Backpropagate from d(loss)/d(logits); weight gradients accumulate into
  /// the layer states.
  void backward_from_logits(const Tensor<T>& grad_logits) {
    if (head_.size()) {
      Tensor<T> g = head_.backward(grad_logits, /*skip_trailing_softmax=*/true);
      int n = g.dim(0);
      int offset = 0;
      for (size_t b = 0; b < branches_.size(); ++b) {
        int w = branch_widths_[b];
        Tensor<T> gb({n, w});
        for (int i = 0; i < n; ++i) {
          const T* src = g.data() + static_cast<size_t>(i) * g.dim(1) + offset;
          T* dst = gb.data() + static_cast<size_t>(i) * w;
          for (int j = 0; j < w; ++j) dst[j] = src[j];
        }
        offset += w;
        branches_[b].backward(std::move(gb), /*skip_trailing_softmax=*/false);
      }
    } else {
      branches_[0].backward(grad_logits, /*skip_trailing_softmax=*/true);
    }
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    for (auto& b : branches_) {
      for (auto& p : b.params()) out.push_back(p);
    }
    for (auto& p : head_.params()) out.push_back(p);
    return out;
  }

  std::vector<BufferRef<T>> buffers() {
    std::vector<BufferRef<T>> out;
    for (auto& b : branches_) {
      for (auto& r : b.buffers()) out.push_back(r);
    }
    for (auto& r : head_.buffers()) out.push_back(r);
    return out;
  }

  long long param_count() {
    long long n = 0;
    for (auto& p : params()) n += p.value->size();
    return n;
  }

  void set_mask_frozen(bool frozen) {
    for (auto& b : branches_) b.set_mask_frozen(frozen);
    head_.set_mask_frozen(frozen);
  }

  LayerSeq<T>& branch(size_t b) { return branches_[b]; }
  LayerSeq<T>& head() { return head_; }

private:
  Tensor<T> run_forward(const std::vector<Tensor<T>>& xs, Mode mode, bool stop_at_logits) {
    if (xs.size() != branches_.size()) {
      throw ShapeError(cat(spec_.name, ": expected ", branches_.size(), " input tensors, got ",
                           xs.size()));
    }
    int n = xs[0].dim(0);
    for (const auto& x : xs) {
      if (x.dim(0) != n) throw ShapeError(cat(spec_.name, ": input batch sizes differ"));
    }
    if (!head_.size()) {
      return stop_at_logits ? branches_[0].forward_logits(xs[0], mode)
                            : branches_[0].forward(xs[0], mode);
    }
    int total = 0;
    for (int w : branch_widths_) total += w;
    Tensor<T> concat({n, total});
    int offset = 0;
    for (size_t b = 0; b < branches_.size(); ++b) {
      Tensor<T> out = branches_[b].forward(xs[b], mode);
      int w = branch_widths_[b];
      for (int i = 0; i < n; ++i) {
        const T* src = out.data() + static_cast<size_t>(i) * w;
        T* dst = concat.data() + static_cast<size_t>(i) * total + offset;
        for (int j = 0; j < w; ++j) dst[j] = src[j];
      }
      offset += w;
    }
    return stop_at_logits ? head_.forward_logits(std::move(concat), mode)
                          : head_.forward(std::move(concat), mode);
  }

  ModelSpec spec_;
  std::vector<LayerSeq<T>> branches_;
  std::vector<int> branch_widths_;
  LayerSeq<T> head_;
};

}  // namespace falldet
