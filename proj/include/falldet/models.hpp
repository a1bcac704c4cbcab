#pragma once

#include <string>
#include <vector>

#include "falldet/common.hpp"
#include "falldet/network.hpp"

namespace falldet {

/// Sensor-only MLP: 28 features in, 12-way softmax out.
inline ModelSpec build_sensor_mlp() {
  ModelSpec m;
  m.name = "sensor-mlp";
  m.branches = {{
      LayerSpec::dense(2000),
      LayerSpec::relu(),
      LayerSpec::batchnorm(),
      LayerSpec::dense(600),
      LayerSpec::relu(),
      LayerSpec::batchnorm(),
      LayerSpec::dropout(0.2),
      LayerSpec::dense(12),
      LayerSpec::softmax(),
  }};
  m.input_shapes = {{kNumSensorFeatures}};
  m.inputs = {BranchInput::SensorVector};
  return m;
}

/// Single-camera CNN on 32x32 grayscale input.
inline ModelSpec build_cam_cnn() {
  ModelSpec m;
  m.name = "cam-cnn";
  m.branches = {{
      LayerSpec::conv2d(16, 3, 3),
      LayerSpec::relu(),
      LayerSpec::batchnorm(),
      LayerSpec::maxpool2d(2, 2),
      LayerSpec::flatten(),
      LayerSpec::dense(200),
      LayerSpec::relu(),
      LayerSpec::dropout(0.2),
      LayerSpec::dense(12),
      LayerSpec::softmax(),
  }};
  m.input_shapes = {{1, kImageSide, kImageSide}};
  m.inputs = {BranchInput::Camera};
  return m;
}

inline std::vector<LayerSpec> camera_feature_branch() {
  return {
      LayerSpec::conv2d(15, 3, 3),
      LayerSpec::relu(),
      LayerSpec::maxpool2d(2, 2),
      LayerSpec::batchnorm(),
      LayerSpec::flatten(),
  };
}

/// Two-camera network: per-camera conv branches concatenated into dense head.
inline ModelSpec build_dual_cam_cnn() {
  ModelSpec m;
  m.name = "dual-cam-cnn";
  m.branches = {camera_feature_branch(), camera_feature_branch()};
  m.input_shapes = {{1, kImageSide, kImageSide}, {1, kImageSide, kImageSide}};
  m.inputs = {BranchInput::Camera, BranchInput::Camera};
  m.head = {
      LayerSpec::dense(400),
      LayerSpec::relu(),
      LayerSpec::dense(200),
      LayerSpec::relu(),
      LayerSpec::dropout(0.2),
      LayerSpec::dense(12),
      LayerSpec::softmax(),
  };
  return m;
}

/// Sensor + two-camera fusion network. Branch order is cam1, cam2, sensor;
/// the sensor branch sees the 28 features as a 1-channel sequence.
inline ModelSpec build_fusion() {
  ModelSpec m;
  m.name = "fusion";
  m.branches = {camera_feature_branch(), camera_feature_branch(),
                {
                    LayerSpec::conv1d(10, 3),
                    LayerSpec::relu(),
                    LayerSpec::maxpool1d(2),
                    LayerSpec::batchnorm(),
                    LayerSpec::flatten(),
                }};
  m.input_shapes = {{1, kImageSide, kImageSide}, {1, kImageSide, kImageSide}, {1, kNumSensorFeatures}};
  m.inputs = {BranchInput::Camera, BranchInput::Camera, BranchInput::SensorSequence};
  m.head = {
      LayerSpec::dense(600),
      LayerSpec::relu(),
      LayerSpec::dense(1200),
      LayerSpec::relu(),
      LayerSpec::dropout(0.2),
      LayerSpec::dense(12),
      LayerSpec::softmax(),
  };
  return m;
}

/// Three-stage conv/pool stack used as the prior-work camera baseline.
inline ModelSpec build_baseline_cnn() {
  ModelSpec m;
  m.name = "baseline-cnn";
  m.branches = {{
      LayerSpec::conv2d(8, 3, 3),
      LayerSpec::relu(),
      LayerSpec::maxpool2d(2, 2),
      LayerSpec::conv2d(16, 3, 3),
      LayerSpec::relu(),
      LayerSpec::maxpool2d(2, 2),
      LayerSpec::conv2d(32, 3, 3),
      LayerSpec::relu(),
      LayerSpec::maxpool2d(2, 2),
      LayerSpec::flatten(),
      LayerSpec::dense(12),
      LayerSpec::softmax(),
  }};
  m.input_shapes = {{1, kImageSide, kImageSide}};
  m.inputs = {BranchInput::Camera};
  return m;
}

inline const std::vector<std::string>& neural_model_names() {
  static const std::vector<std::string> names = {"sensor-mlp", "cam-cnn", "dual-cam-cnn", "fusion",
                                                 "baseline-cnn"};
  return names;
}

inline ModelSpec build_model(const std::string& name) {
  if (name == "sensor-mlp") return build_sensor_mlp();
  if (name == "cam-cnn") return build_cam_cnn();
  if (name == "dual-cam-cnn") return build_dual_cam_cnn();
  if (name == "fusion") return build_fusion();
  if (name == "baseline-cnn") return build_baseline_cnn();
  throw ConfigError(cat("unknown neural model '", name, "'"));
}

/// Trainable parameter count from the spec alone (weights, biases, and
/// batchnorm gamma/beta; running statistics are not trainable).
inline long long spec_param_count(const ModelSpec& spec) {
  long long total = 0;
  auto count_seq = [&](const std::vector<LayerSpec>& seq, Shape s) {
    for (const auto& l : seq) {
      switch (l.kind) {
        case LayerKind::Dense:
          total += static_cast<long long>(s[0]) * l.units + l.units;
          break;
        case LayerKind::Conv2D:
          total += static_cast<long long>(l.filters) * s[0] * l.kernel_h * l.kernel_w + l.filters;
          break;
        case LayerKind::Conv1D:
          total += static_cast<long long>(l.filters) * s[0] * l.kernel_w + l.filters;
          break;
        case LayerKind::BatchNorm:
          total += 2LL * s[0];
          break;
        default:
          break;
      }
      s = layer_output_shape(l, s);
    }
  };
  for (size_t b = 0; b < spec.branches.size(); ++b) count_seq(spec.branches[b], spec.input_shapes[b]);
  if (!spec.head.empty()) count_seq(spec.head, {spec.concat_width()});
  return total;
}

}  // namespace falldet
