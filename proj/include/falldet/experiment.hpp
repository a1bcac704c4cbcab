#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "falldet/checkpoint.hpp"
#include "falldet/dataio.hpp"
#include "falldet/metrics.hpp"
#include "falldet/models.hpp"
#include "falldet/synth.hpp"
#include "falldet/train.hpp"
#include "falldet/trees.hpp"

namespace falldet {

// ---------------------------------------------------------------------------
// Data configurations

enum class DataConfig { S, C1, C2, C1C2, SC1C2 };

inline const char* data_config_name(DataConfig c) {
  switch (c) {
    case DataConfig::S: return "S";
    case DataConfig::C1: return "C1";
    case DataConfig::C2: return "C2";
    case DataConfig::C1C2: return "C1+C2";
    case DataConfig::SC1C2: return "S+C1+C2";
  }
  return "?";
}

inline DataConfig data_config_from_name(const std::string& s) {
  if (s == "S") return DataConfig::S;
  if (s == "C1") return DataConfig::C1;
  if (s == "C2") return DataConfig::C2;
  if (s == "C1+C2") return DataConfig::C1C2;
  if (s == "S+C1+C2") return DataConfig::SC1C2;
  throw ConfigError(cat("unknown data configuration '", s, "' (expected S, C1, C2, C1+C2, S+C1+C2)"));
}

inline int data_config_rank(DataConfig c) { return static_cast<int>(c); }

inline bool is_tree_model(const std::string& name) {
  return name == "xgb-like" || name == "cat-like" || name == "knn" || name == "rf";
}

inline const std::vector<std::string>& all_model_names() {
  static const std::vector<std::string> names = {"sensor-mlp", "cam-cnn",  "dual-cam-cnn",
                                                 "fusion",     "baseline-cnn", "xgb-like",
                                                 "cat-like",   "knn",      "rf"};
  return names;
}

/// Which data configurations can feed which model.
inline bool model_accepts_config(const std::string& model, DataConfig c) {
  if (model == "sensor-mlp" || is_tree_model(model)) return c == DataConfig::S;
  if (model == "cam-cnn" || model == "baseline-cnn") return c == DataConfig::C1 || c == DataConfig::C2;
  if (model == "dual-cam-cnn") return c == DataConfig::C1C2;
  if (model == "fusion") return c == DataConfig::SC1C2;
  throw ConfigError(cat("unknown model '", model, "'"));
}

inline void check_model_config(const std::string& model, DataConfig c) {
  if (!model_accepts_config(model, c)) {
    throw ConfigError(cat("model '", model, "' is not compatible with data configuration '",
                          data_config_name(c), "'"));
  }
}

// ---------------------------------------------------------------------------
// Assembling per-model input tensors from aligned samples

inline Tensor<float> sensor_matrix(const std::vector<AlignedSample>& samples) {
  Tensor<float> t({std::max<int>(1, static_cast<int>(samples.size())), kNumSensorFeatures});
  for (size_t i = 0; i < samples.size(); ++i) {
    std::copy(samples[i].sensor.begin(), samples[i].sensor.end(),
              t.data() + i * kNumSensorFeatures);
  }
  return t;
}

inline Tensor<float> camera_tensor(const std::vector<AlignedSample>& samples, int camera) {
  Tensor<float> t({std::max<int>(1, static_cast<int>(samples.size())), 1, kImageSide, kImageSide});
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& px = camera == 1 ? samples[i].cam1 : samples[i].cam2;
    std::copy(px.begin(), px.end(), t.data() + i * kImagePixels);
  }
  return t;
}

inline std::vector<int> label_vector(const std::vector<AlignedSample>& samples) {
  std::vector<int> y(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) y[i] = samples[i].label;
  return y;
}

/// Build the branch inputs a model expects under a data configuration.
inline ModelData make_model_data(const std::vector<AlignedSample>& samples,
                                 const std::string& model, DataConfig config) {
  check_model_config(model, config);
  ModelData data;
  data.labels = label_vector(samples);
  switch (config) {
    case DataConfig::S:
      data.inputs.push_back(sensor_matrix(samples));
      break;
    case DataConfig::C1:
      data.inputs.push_back(camera_tensor(samples, 1));
      break;
    case DataConfig::C2:
      data.inputs.push_back(camera_tensor(samples, 2));
      break;
    case DataConfig::C1C2:
      data.inputs.push_back(camera_tensor(samples, 1));
      data.inputs.push_back(camera_tensor(samples, 2));
      break;
    case DataConfig::SC1C2: {
      data.inputs.push_back(camera_tensor(samples, 1));
      data.inputs.push_back(camera_tensor(samples, 2));
      Tensor<float> s = sensor_matrix(samples);
      data.inputs.push_back(s.reshaped({s.dim(0), 1, kNumSensorFeatures}));
      break;
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct ExperimentConfig {
  std::string aligned_path;  // empty means synthetic
  int synth_n_per_class = 50;
  DataConfig configuration = DataConfig::S;
  std::string model = "sensor-mlp";
  TrainConfig train;
  bool train_given = false;
  GBTConfig gbt;
  int knn_k = 5;
  RFConfig rf;
  uint64_t seed = 42;
  std::string out_dir = "runs/run";
  bool fit_on_all = false;

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("aligned")) cfg.aligned_path = d.at("aligned").get<std::string>();
      if (d.contains("synth")) cfg.synth_n_per_class = d.at("synth").value("n_per_class", 50);
    }
    cfg.configuration = data_config_from_name(j.value("configuration", "S"));
    cfg.model = j.value("model", "sensor-mlp");
    cfg.seed = j.value("seed", 42ull);
    cfg.out_dir = j.value("out", "runs/run");
    cfg.fit_on_all = j.value("fit_on_all", false);

    if (cfg.model == "baseline-cnn") cfg.train = baseline_cnn_train_config();
    if (j.contains("train")) {
      cfg.train_given = true;
      const auto& t = j.at("train");
      cfg.train.optimizer = t.value("optimizer", cfg.train.optimizer);
      cfg.train.lr = t.value("lr", cfg.train.lr);
      cfg.train.l2 = t.value("l2", cfg.train.l2);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
      cfg.train.patience = t.value("patience", cfg.train.patience);
      cfg.train.checkpoint_metric = t.value("metric", cfg.train.checkpoint_metric);
    }
    if (cfg.model == "xgb-like") cfg.gbt = xgb_like_preset();
    if (cfg.model == "cat-like") cfg.gbt = cat_like_preset();
    if (j.contains("gbt")) {
      const auto& t = j.at("gbt");
      cfg.gbt.n_estimators = t.value("n_estimators", cfg.gbt.n_estimators);
      cfg.gbt.learning_rate = t.value("learning_rate", cfg.gbt.learning_rate);
      cfg.gbt.max_depth = t.value("max_depth", cfg.gbt.max_depth);
      cfg.gbt.min_samples_leaf = t.value("min_samples_leaf", cfg.gbt.min_samples_leaf);
      cfg.gbt.lambda = t.value("lambda", cfg.gbt.lambda);
    }
    if (j.contains("knn")) cfg.knn_k = j.at("knn").value("k", 5);
    if (j.contains("rf")) {
      const auto& t = j.at("rf");
      cfg.rf.n_trees = t.value("n_trees", cfg.rf.n_trees);
      cfg.rf.bootstrap = t.value("bootstrap", cfg.rf.bootstrap);
    }
    return cfg;
  }

  nlohmann::json to_json() const {
    nlohmann::json data;
    if (!aligned_path.empty()) {
      data = {{"aligned", aligned_path}};
    } else {
      data = {{"synth", {{"n_per_class", synth_n_per_class}}}};
    }
    nlohmann::json j{{"data", data},
                     {"configuration", data_config_name(configuration)},
                     {"model", model},
                     {"seed", seed},
                     {"out", out_dir},
                     {"fit_on_all", fit_on_all}};
    if (is_tree_model(model)) {
      if (model == "xgb-like" || model == "cat-like") {
        j["gbt"] = {{"n_estimators", gbt.n_estimators},
                    {"learning_rate", gbt.learning_rate},
                    {"max_depth", gbt.max_depth},
                    {"min_samples_leaf", gbt.min_samples_leaf},
                    {"lambda", gbt.lambda}};
      } else if (model == "knn") {
        j["knn"] = {{"k", knn_k}};
      } else {
        j["rf"] = {{"n_trees", rf.n_trees}, {"bootstrap", rf.bootstrap}};
      }
    } else {
      j["train"] = {{"optimizer", train.optimizer},
                    {"lr", train.lr},
                    {"l2", train.l2},
                    {"batch_size", train.batch_size},
                    {"max_epochs", train.max_epochs},
                    {"patience", train.patience},
                    {"metric", train.checkpoint_metric}};
    }
    return j;
  }
};

// ---------------------------------------------------------------------------
// Runs

struct RunRecord {
  ExperimentConfig config;
  std::string checkpoint_path;
  EvalReport report_train, report_val, report_test;
  double train_seconds = 0;
  double total_seconds = 0;

  nlohmann::json to_json() const {
    return nlohmann::json{{"config", config.to_json()},
                          {"checkpoint", checkpoint_path},
                          {"reports",
                           {{"train", report_train.to_json()},
                            {"val", report_val.to_json()},
                            {"test", report_test.to_json()}}},
                          {"timings", {{"train_seconds", train_seconds}, {"total_seconds", total_seconds}}},
                          {"engine", kVersion}};
  }
};

namespace detail {

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError(cat("cannot write ", path));
  f << j.dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError(cat("cannot open ", path));
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(cat(path, ": ", e.what()));
  }
  return j;
}

struct PreparedSplits {
  DatasetSplit split;
  StandardizationStats stats;
};

inline PreparedSplits prepare_splits(const std::vector<AlignedSample>& samples, uint64_t seed,
                                     bool fit_on_all) {
  PreparedSplits out;
  out.split = split_dataset(samples, seed);
  out.stats = fit_standardization(fit_on_all ? samples : out.split.train);
  apply_standardization(out.stats, out.split.train);
  apply_standardization(out.stats, out.split.val);
  apply_standardization(out.stats, out.split.test);
  return out;
}

inline EvalReport tree_report(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                              const std::string& tag) {
  return report(ConfusionMatrix::from(y_true, y_pred, kNumClasses), tag);
}

}  // namespace detail

/// Load (or synthesize) the aligned dataset named by the config.
inline std::vector<AlignedSample> load_experiment_samples(const ExperimentConfig& cfg) {
  if (!cfg.aligned_path.empty()) return read_aligned_file(cfg.aligned_path);
  return synth_aligned(cfg.synth_n_per_class, cfg.seed);
}

/// Train + evaluate one experiment; writes checkpoint, reports, and run.json
/// into the output directory and returns the record.
inline RunRecord run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  auto t_start = std::chrono::steady_clock::now();
  check_model_config(cfg.model, cfg.configuration);
  fs::create_directories(cfg.out_dir);

  std::vector<AlignedSample> samples = load_experiment_samples(cfg);
  detail::PreparedSplits prep = detail::prepare_splits(samples, cfg.seed, cfg.fit_on_all);
  const std::string tag = data_config_name(cfg.configuration);

  RunRecord rec;
  rec.config = cfg;
  rec.checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.json").string();

  StandardizationRef stats_ref;
  stats_ref.mean.assign(prep.stats.mean.begin(), prep.stats.mean.end());
  stats_ref.stddev.assign(prep.stats.stddev.begin(), prep.stats.stddev.end());
  stats_ref.fit_on_all = cfg.fit_on_all;

  auto t_train_start = std::chrono::steady_clock::now();
  if (is_tree_model(cfg.model)) {
    Tensor<float> xtr = sensor_matrix(prep.split.train);
    Tensor<float> xva = sensor_matrix(prep.split.val);
    Tensor<float> xte = sensor_matrix(prep.split.test);
    std::vector<int> ytr = label_vector(prep.split.train);
    std::vector<int> yva = label_vector(prep.split.val);
    std::vector<int> yte = label_vector(prep.split.test);

    nlohmann::json model_json;
    std::vector<int> ptr, pva, pte;
    if (cfg.model == "xgb-like" || cfg.model == "cat-like") {
      GBTModel m = gbt_fit(xtr, ytr, cfg.gbt);
      ptr = gbt_predict(m, xtr).labels;
      pva = gbt_predict(m, xva).labels;
      pte = gbt_predict(m, xte).labels;
      model_json = gbt_to_json(m);
    } else if (cfg.model == "knn") {
      KNNModel m{cfg.knn_k, kNumClasses, xtr, ytr};
      ptr = knn_predict(m.train_x, m.train_y, xtr, m.k);
      pva = knn_predict(m.train_x, m.train_y, xva, m.k);
      pte = knn_predict(m.train_x, m.train_y, xte, m.k);
      model_json = knn_to_json(m);
    } else {
      RFConfig rf_cfg = cfg.rf;
      rf_cfg.seed = cfg.seed;
      RFModel m = rf_fit(xtr, ytr, rf_cfg);
      ptr = rf_predict(m, xtr);
      pva = rf_predict(m, xva);
      pte = rf_predict(m, xte);
      model_json = rf_to_json(m);
    }
    rec.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_train_start).count();

    rec.report_train = detail::tree_report(ytr, ptr, tag);
    rec.report_val = detail::tree_report(yva, pva, tag);
    rec.report_test = detail::tree_report(yte, pte, tag);

    nlohmann::json manifest{{"format", "falldet-checkpoint"},
                            {"version", 1},
                            {"engine", kVersion},
                            {"model", cfg.model},
                            {"model_type", model_json.at("model_type")},
                            {"configuration", tag},
                            {"seed", cfg.seed},
                            {"split",
                             {{"seed", cfg.seed},
                              {"train", prep.split.ratios.train},
                              {"val", prep.split.ratios.val},
                              {"test", prep.split.ratios.test}}},
                            {"standardization",
                             {{"mean", stats_ref.mean},
                              {"std", stats_ref.stddev},
                              {"fit_on_all", stats_ref.fit_on_all}}},
                            {"tree_model", model_json}};
    detail::write_json_file(rec.checkpoint_path, manifest);
  } else {
    ModelSpec spec = build_model(cfg.model);
    Network<float> net = Network<float>::build(spec, cfg.seed);
    ModelData train_data = make_model_data(prep.split.train, cfg.model, cfg.configuration);
    ModelData val_data = make_model_data(prep.split.val, cfg.model, cfg.configuration);
    ModelData test_data = make_model_data(prep.split.test, cfg.model, cfg.configuration);

    TrainConfig tcfg = cfg.train;
    tcfg.seed = cfg.seed;
    TrainResult tres = train(net, train_data, val_data, tcfg);
    rec.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_train_start).count();

    nlohmann::json history = nlohmann::json::array();
    for (const auto& e : tres.history) {
      history.push_back({{"epoch", e.epoch},
                         {"train_loss", e.train_loss},
                         {"val_accuracy", e.val_accuracy},
                         {"val_f1_weighted", e.val_f1_weighted}});
    }

    Checkpoint meta;
    meta.spec = spec;
    meta.configuration = tag;
    meta.seed = cfg.seed;
    meta.split.seed = cfg.seed;
    meta.split.train = prep.split.ratios.train;
    meta.split.val = prep.split.ratios.val;
    meta.split.test = prep.split.ratios.test;
    meta.standardization = stats_ref;
    meta.history = history;
    save_checkpoint(meta, net, rec.checkpoint_path);

    rec.report_train = evaluate(net, train_data, tag);
    rec.report_val = evaluate(net, val_data, tag);
    rec.report_test = evaluate(net, test_data, tag);
    detail::write_json_file((fs::path(cfg.out_dir) / "history.json").string(), history);
  }

  detail::write_json_file((fs::path(cfg.out_dir) / "report_val.json").string(), rec.report_val.to_json());
  detail::write_json_file((fs::path(cfg.out_dir) / "report_test.json").string(), rec.report_test.to_json());
  rec.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  detail::write_json_file((fs::path(cfg.out_dir) / "run.json").string(), rec.to_json());
  return rec;
}

// ---------------------------------------------------------------------------
// Evaluating a stored checkpoint on a dataset split

inline EvalReport evaluate_checkpoint(const std::string& checkpoint_path,
                                      const std::string& data_path, const std::string& split_name) {
  nlohmann::json manifest = detail::read_json_file(checkpoint_path);
  if (manifest.value("format", "") != "falldet-checkpoint") {
    throw DataError(cat(checkpoint_path, " is not a checkpoint manifest"));
  }
  const std::string model = manifest.at("model").get<std::string>();
  DataConfig config = data_config_from_name(manifest.at("configuration").get<std::string>());

  std::vector<AlignedSample> samples = read_aligned_file(data_path);
  DatasetSplit split = split_dataset(samples, manifest.at("split").at("seed").get<uint64_t>());
  StandardizationStats stats;
  const auto& st = manifest.at("standardization");
  if (st.is_null()) throw DataError(cat(checkpoint_path, ": missing standardization stats"));
  auto mean = st.at("mean").get<std::vector<double>>();
  auto sd = st.at("std").get<std::vector<double>>();
  if (mean.size() != kNumSensorFeatures || sd.size() != kNumSensorFeatures) {
    throw DataError(cat(checkpoint_path, ": standardization stats have wrong width"));
  }
  std::copy(mean.begin(), mean.end(), stats.mean.begin());
  std::copy(sd.begin(), sd.end(), stats.stddev.begin());
  apply_standardization(stats, split.train);
  apply_standardization(stats, split.val);
  apply_standardization(stats, split.test);

  const std::vector<AlignedSample>* part = nullptr;
  if (split_name == "train") {
    part = &split.train;
  } else if (split_name == "val") {
    part = &split.val;
  } else if (split_name == "test") {
    part = &split.test;
  } else {
    throw ConfigError(cat("unknown split '", split_name, "' (expected train, val, test)"));
  }

  const std::string tag = data_config_name(config);
  if (manifest.value("model_type", "neural") == "neural") {
    LoadedCheckpoint ck = load_checkpoint(checkpoint_path);
    ModelData data = make_model_data(*part, model, config);
    return evaluate(ck.net, data, tag);
  }
  const auto& mj = manifest.at("tree_model");
  Tensor<float> x = sensor_matrix(*part);
  std::vector<int> y = label_vector(*part);
  std::vector<int> pred;
  const std::string type = mj.at("model_type").get<std::string>();
  if (type == "gbt") {
    pred = gbt_predict(gbt_from_json(mj), x).labels;
  } else if (type == "knn") {
    KNNModel m = knn_from_json(mj);
    pred = knn_predict(m.train_x, m.train_y, x, m.k);
  } else if (type == "rf") {
    pred = rf_predict(rf_from_json(mj), x);
  } else {
    throw DataError(cat(checkpoint_path, ": unknown tree model type '", type, "'"));
  }
  return detail::tree_report(y, pred, tag);
}

// ---------------------------------------------------------------------------
// Comparison table

struct CompareRow {
  std::string configuration;
  std::string model;
  EvalReport test_report;
};

/// Rows sorted by data configuration (S, C1, C2, C1+C2, S+C1+C2) then model
/// name; stable for equal keys.
inline std::vector<CompareRow> load_compare_rows(const std::vector<std::string>& run_paths) {
  if (run_paths.empty()) throw ConfigError("compare: need at least one run record");
  std::vector<CompareRow> rows;
  for (const auto& p : run_paths) {
    nlohmann::json j = detail::read_json_file(p);
    CompareRow row;
    row.configuration = j.at("config").at("configuration").get<std::string>();
    row.model = j.at("config").at("model").get<std::string>();
    row.test_report = EvalReport::from_json(j.at("reports").at("test"));
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CompareRow& a, const CompareRow& b) {
    int ra = data_config_rank(data_config_from_name(a.configuration));
    int rb = data_config_rank(data_config_from_name(b.configuration));
    if (ra != rb) return ra < rb;
    return a.model < b.model;
  });
  return rows;
}

inline std::string render_compare_table(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os << render_report_header() << "\n";
  for (const auto& r : rows) os << render_report_row(r.configuration, r.model, r.test_report) << "\n";
  return os.str();
}

}  // namespace falldet
