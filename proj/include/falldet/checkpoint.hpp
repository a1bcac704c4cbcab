#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "falldet/binio.hpp"
#include "falldet/common.hpp"
#include "falldet/network.hpp"

namespace falldet {

inline nlohmann::json layer_spec_to_json(const LayerSpec& s) {
  nlohmann::json j{{"kind", kind_name(s.kind)}};
  switch (s.kind) {
    case LayerKind::Dense: j["units"] = s.units; break;
    case LayerKind::Conv2D:
      j["filters"] = s.filters;
      j["kernel"] = {s.kernel_h, s.kernel_w};
      break;
    case LayerKind::Conv1D:
      j["filters"] = s.filters;
      j["kernel"] = s.kernel_w;
      break;
    case LayerKind::MaxPool2D: j["pool"] = {s.pool_h, s.pool_w}; break;
    case LayerKind::MaxPool1D: j["pool"] = s.pool_w; break;
    case LayerKind::BatchNorm:
      j["epsilon"] = s.epsilon;
      j["momentum"] = s.momentum;
      break;
    case LayerKind::Dropout: j["rate"] = s.rate; break;
    default: break;
  }
  return j;
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "dense") return LayerSpec::dense(j.at("units").get<int>());
  if (kind == "conv2d") {
    auto k = j.at("kernel");
    return LayerSpec::conv2d(j.at("filters").get<int>(), k.at(0).get<int>(), k.at(1).get<int>());
  }
  if (kind == "conv1d") return LayerSpec::conv1d(j.at("filters").get<int>(), j.at("kernel").get<int>());
  if (kind == "maxpool2d") {
    auto p = j.at("pool");
    return LayerSpec::maxpool2d(p.at(0).get<int>(), p.at(1).get<int>());
  }
  if (kind == "maxpool1d") return LayerSpec::maxpool1d(j.at("pool").get<int>());
  if (kind == "batchnorm") {
    return LayerSpec::batchnorm(j.at("epsilon").get<double>(), j.at("momentum").get<double>());
  }
  if (kind == "dropout") return LayerSpec::dropout(j.at("rate").get<double>());
  if (kind == "flatten") return LayerSpec::flatten();
  if (kind == "relu") return LayerSpec::relu();
  if (kind == "softmax") return LayerSpec::softmax();
  if (kind == "concat") return LayerSpec::concat();
  throw DataError(cat("checkpoint: unknown layer kind '", kind, "'"));
}

inline nlohmann::json model_spec_to_json(const ModelSpec& spec) {
  nlohmann::json branches = nlohmann::json::array();
  for (const auto& b : spec.branches) {
    nlohmann::json seq = nlohmann::json::array();
    for (const auto& l : b) seq.push_back(layer_spec_to_json(l));
    branches.push_back(seq);
  }
  nlohmann::json head = nlohmann::json::array();
  for (const auto& l : spec.head) head.push_back(layer_spec_to_json(l));
  nlohmann::json inputs = nlohmann::json::array();
  for (auto b : spec.inputs) inputs.push_back(branch_input_name(b));
  return nlohmann::json{{"name", spec.name},
                        {"branches", branches},
                        {"head", head},
                        {"input_shapes", spec.input_shapes},
                        {"inputs", inputs},
                        {"n_classes", spec.n_classes}};
}

inline BranchInput branch_input_from_name(const std::string& s) {
  if (s == "sensor") return BranchInput::SensorVector;
  if (s == "sensor-seq") return BranchInput::SensorSequence;
  if (s == "camera") return BranchInput::Camera;
  throw DataError(cat("checkpoint: unknown branch input '", s, "'"));
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.name = j.at("name").get<std::string>();
  for (const auto& b : j.at("branches")) {
    std::vector<LayerSpec> seq;
    for (const auto& l : b) seq.push_back(layer_spec_from_json(l));
    spec.branches.push_back(std::move(seq));
  }
  for (const auto& l : j.at("head")) spec.head.push_back(layer_spec_from_json(l));
  spec.input_shapes = j.at("input_shapes").get<std::vector<Shape>>();
  for (const auto& s : j.at("inputs")) spec.inputs.push_back(branch_input_from_name(s.get<std::string>()));
  spec.n_classes = j.at("n_classes").get<int>();
  return spec;
}

struct StandardizationRef {
  std::vector<double> mean;
  std::vector<double> stddev;
  bool fit_on_all = false;
};

struct SplitRef {
  uint64_t seed = 42;
  double train = 0.6, val = 0.2, test = 0.2;
};

/// Everything needed to reload a trained model and reproduce its predictions
/// bit for bit: the manifest JSON plus an adjacent little-endian f32 blob in
/// manifest order (trainable parameters first, then batchnorm buffers).
struct Checkpoint {
  ModelSpec spec;
  std::string configuration;  // data configuration tag
  uint64_t seed = 42;
  SplitRef split;
  std::optional<StandardizationRef> standardization;
  nlohmann::json history;  // per-epoch loss/metrics, informational
};

inline void save_checkpoint(const Checkpoint& meta, Network<float>& net,
                            const std::string& manifest_path) {
  namespace fs = std::filesystem;
  fs::path mpath(manifest_path);
  fs::path bpath = mpath;
  bpath.replace_extension(".bin");

  nlohmann::json tensors = nlohmann::json::array();
  long long offset = 0;
  std::ofstream blob(bpath, std::ios::binary | std::ios::trunc);
  if (!blob) throw DataError(cat("cannot write weight blob ", bpath.string()));
  auto emit = [&](const std::string& name, Tensor<float>& t) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    binio::write_f32(blob, t.data(), static_cast<size_t>(t.size()));
    offset += t.size();
  };
  for (auto& p : net.params()) emit(p.name, *p.value);
  for (auto& b : net.buffers()) emit(b.name, *b.value);
  blob.close();

  nlohmann::json j{{"format", "falldet-checkpoint"},
                   {"version", 1},
                   {"engine", kVersion},
                   {"model", meta.spec.name},
                   {"model_type", "neural"},
                   {"configuration", meta.configuration},
                   {"seed", meta.seed},
                   {"split",
                    {{"seed", meta.split.seed},
                     {"train", meta.split.train},
                     {"val", meta.split.val},
                     {"test", meta.split.test}}},
                   {"spec", model_spec_to_json(meta.spec)},
                   {"tensors", tensors},
                   {"weights_file", bpath.filename().string()},
                   {"history", meta.history}};
  if (meta.standardization) {
    j["standardization"] = {{"mean", meta.standardization->mean},
                            {"std", meta.standardization->stddev},
                            {"fit_on_all", meta.standardization->fit_on_all}};
  } else {
    j["standardization"] = nullptr;
  }
  std::ofstream mf(mpath, std::ios::trunc);
  if (!mf) throw DataError(cat("cannot write checkpoint manifest ", mpath.string()));
  mf << j.dump(2) << "\n";
}

struct LoadedCheckpoint {
  Checkpoint meta;
  Network<float> net;
};

inline LoadedCheckpoint load_checkpoint(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream mf(manifest_path);
  if (!mf) throw DataError(cat("cannot open checkpoint manifest ", manifest_path));
  nlohmann::json j;
  try {
    mf >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(cat("checkpoint manifest ", manifest_path, ": ", e.what()));
  }
  if (j.value("format", "") != "falldet-checkpoint") {
    throw DataError(cat(manifest_path, " is not a checkpoint manifest"));
  }
  LoadedCheckpoint out;
  out.meta.spec = model_spec_from_json(j.at("spec"));
  out.meta.configuration = j.value("configuration", "");
  out.meta.seed = j.at("seed").get<uint64_t>();
  out.meta.split.seed = j.at("split").at("seed").get<uint64_t>();
  out.meta.split.train = j.at("split").at("train").get<double>();
  out.meta.split.val = j.at("split").at("val").get<double>();
  out.meta.split.test = j.at("split").at("test").get<double>();
  if (!j.at("standardization").is_null()) {
    StandardizationRef s;
    s.mean = j.at("standardization").at("mean").get<std::vector<double>>();
    s.stddev = j.at("standardization").at("std").get<std::vector<double>>();
    s.fit_on_all = j.at("standardization").value("fit_on_all", false);
    out.meta.standardization = std::move(s);
  }
  out.meta.history = j.value("history", nlohmann::json());

  out.net = Network<float>::build(out.meta.spec, out.meta.seed);
  fs::path bpath = fs::path(manifest_path).parent_path() / j.at("weights_file").get<std::string>();
  std::ifstream blob(bpath, std::ios::binary);
  if (!blob) throw DataError(cat("cannot open weight blob ", bpath.string()));

  size_t ti = 0;
  const auto& tensors = j.at("tensors");
  auto fill = [&](const std::string& name, Tensor<float>& t) {
    if (ti >= tensors.size()) throw DataError("checkpoint manifest lists too few tensors");
    const auto& entry = tensors.at(ti++);
    if (entry.at("name").get<std::string>() != name) {
      throw DataError(cat("checkpoint tensor order mismatch: manifest has ",
                          entry.at("name").get<std::string>(), ", model expects ", name));
    }
    Shape s = entry.at("shape").get<Shape>();
    if (!shape_eq(s, t.shape())) {
      throw DataError(cat("checkpoint tensor ", name, ": shape ", shape_str(s),
                          " does not match model shape ", shape_str(t.shape())));
    }
    binio::read_f32(blob, t.data(), static_cast<size_t>(t.size()));
    if (!blob) throw DataError(cat("weight blob truncated while reading ", name));
  };
  for (auto& p : out.net.params()) fill(p.name, *p.value);
  for (auto& b : out.net.buffers()) fill(b.name, *b.value);
  if (ti != tensors.size()) throw DataError("checkpoint manifest lists extra tensors");
  return out;
}

}  // namespace falldet
