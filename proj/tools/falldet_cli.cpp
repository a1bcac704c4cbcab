// Command-line front end: synthesize raw data, prepare aligned datasets,
// train/evaluate models, and compare run records.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "falldet/experiment.hpp"
#include "falldet/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void emit(bool json_out, const json& payload, const std::string& text) {
  if (json_out) {
    std::cout << payload.dump(2) << std::endl;
  } else {
    std::cout << text;
  }
}

int run_synth(const std::string& out_dir, int n_per_class, uint64_t seed, bool json_out) {
  falldet::SynthData data = falldet::synth_generate(n_per_class, seed);
  falldet::synth_write_raw(out_dir, data);
  json j{{"command", "synth"},
         {"out", out_dir},
         {"n_per_class", n_per_class},
         {"seed", seed},
         {"sensor_rows", data.sensors.size()},
         {"frames_per_camera", data.cam1.size()}};
  emit(json_out, j,
       falldet::cat("wrote ", data.sensors.size(), " sensor rows and ", data.cam1.size(),
                    " frames per camera to ", out_dir, "\n"));
  return 0;
}

int run_prepare(const std::string& sensors_csv, const std::string& cam1_dir,
                const std::string& cam2_dir, const std::string& out_file,
                const std::string& manifest_path, double max_gap, bool json_out) {
  falldet::ColumnManifest manifest = manifest_path.empty()
                                         ? falldet::default_column_manifest()
                                         : falldet::ColumnManifest::load(manifest_path);
  falldet::CsvLoadResult loaded = falldet::load_consolidated_csv(sensors_csv, manifest);
  falldet::CleanResult cleaned = falldet::clean(loaded.records);
  falldet::FrameDirResult f1 = falldet::load_frames_dir(cam1_dir, 1);
  falldet::FrameDirResult f2 = falldet::load_frames_dir(cam2_dir, 2);
  falldet::AlignResult aligned =
      falldet::align(cleaned.records, f1.frames, f2.frames, max_gap, manifest.label_map);
  falldet::write_aligned_file(out_file, aligned.samples);

  json j{{"command", "prepare"},
         {"rows_read", loaded.rows_read},
         {"rejected_labels", loaded.rejected_labels},
         {"duplicates_removed", cleaned.duplicates_removed},
         {"missing_removed", cleaned.missing_removed},
         {"clean_rows", cleaned.records.size()},
         {"frames_cam1", f1.frames.size()},
         {"frames_cam2", f2.frames.size()},
         {"skipped_files", f1.skipped_files + f2.skipped_files},
         {"dropped_gap", aligned.dropped_gap},
         {"aligned_samples", aligned.samples.size()},
         {"out", out_file}};
  emit(json_out, j,
       falldet::cat("read ", loaded.rows_read, " rows (", loaded.rejected_labels,
                    " rejected labels)\n", "dropped ", cleaned.duplicates_removed,
                    " duplicates, ", cleaned.missing_removed, " rows with missing values\n",
                    "frames: cam1=", f1.frames.size(), " cam2=", f2.frames.size(), " (",
                    f1.skipped_files + f2.skipped_files, " files skipped)\n", "aligned ",
                    aligned.samples.size(), " samples (", aligned.dropped_gap,
                    " dropped by max gap ", max_gap, " s)\n", "wrote ", out_file, "\n"));
  return 0;
}

json report_summary(const falldet::EvalReport& r) {
  return json{{"accuracy", r.accuracy},
              {"precision", r.weighted_precision},
              {"recall", r.weighted_recall},
              {"f1", r.weighted_f1}};
}

int run_train(const std::string& config_path, const std::string& out_override, bool seed_given,
              uint64_t seed_override, int repeats, bool json_out) {
  std::ifstream f(config_path);
  if (!f) throw falldet::DataError(falldet::cat("cannot open config ", config_path));
  json cfg_json;
  f >> cfg_json;
  falldet::ExperimentConfig cfg = falldet::ExperimentConfig::from_json(cfg_json);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (seed_given) cfg.seed = seed_override;
  if (repeats < 1) throw falldet::ConfigError("train: --repeats must be >= 1");

  if (repeats == 1) {
    falldet::RunRecord rec = falldet::run_experiment(cfg);
    json j{{"command", "train"},
           {"model", cfg.model},
           {"configuration", falldet::data_config_name(cfg.configuration)},
           {"seed", cfg.seed},
           {"out", cfg.out_dir},
           {"checkpoint", rec.checkpoint_path},
           {"val", report_summary(rec.report_val)},
           {"test", report_summary(rec.report_test)}};
    emit(json_out, j,
         falldet::cat(falldet::render_report_header(), "\n",
                      falldet::render_report_row(falldet::data_config_name(cfg.configuration),
                                                 cfg.model, rec.report_test),
                      "\ncheckpoint: ", rec.checkpoint_path, "\nrun record: ",
                      (fs::path(cfg.out_dir) / "run.json").string(), "\n"));
    return 0;
  }

  // Repeated runs: seeds seed, seed+1, ... with per-repeat output directories.
  std::vector<falldet::EvalReport> tests;
  json runs = json::array();
  for (int r = 0; r < repeats; ++r) {
    falldet::ExperimentConfig c = cfg;
    c.seed = cfg.seed + static_cast<uint64_t>(r);
    c.out_dir = (fs::path(cfg.out_dir) / falldet::cat("rep", r)).string();
    falldet::RunRecord rec = falldet::run_experiment(c);
    tests.push_back(rec.report_test);
    runs.push_back({{"seed", c.seed}, {"out", c.out_dir}, {"test", report_summary(rec.report_test)}});
  }
  auto mean_std = [&](auto getter) {
    double mean = 0, sq = 0;
    for (const auto& t : tests) mean += getter(t);
    mean /= tests.size();
    for (const auto& t : tests) sq += (getter(t) - mean) * (getter(t) - mean);
    return std::pair<double, double>(mean, std::sqrt(sq / tests.size()));
  };
  auto [acc_m, acc_s] = mean_std([](const falldet::EvalReport& t) { return t.accuracy; });
  auto [f1_m, f1_s] = mean_std([](const falldet::EvalReport& t) { return t.weighted_f1; });
  json j{{"command", "train"},
         {"repeats", repeats},
         {"accuracy", {{"mean", acc_m}, {"std", acc_s}}},
         {"f1", {{"mean", f1_m}, {"std", f1_s}}},
         {"runs", runs}};
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "test accuracy %.4f +- %.4f, weighted F1 %.4f +- %.4f over %d repeats\n", acc_m,
                acc_s, f1_m, f1_s, repeats);
  emit(json_out, j, buf);
  return 0;
}

int run_evaluate(const std::string& checkpoint, const std::string& data_path,
                 const std::string& split, const std::string& out_path, bool json_out) {
  falldet::EvalReport rep = falldet::evaluate_checkpoint(checkpoint, data_path, split);
  json j = rep.to_json();
  j["split"] = split;
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw falldet::DataError(falldet::cat("cannot write ", out_path));
    f << j.dump(2) << "\n";
  }
  emit(json_out, j, falldet::render_report_text(rep, fs::path(checkpoint).stem().string()));
  return 0;
}

int run_compare(const std::vector<std::string>& run_paths, const std::string& out_path,
                bool json_out) {
  std::vector<falldet::CompareRow> rows = falldet::load_compare_rows(run_paths);
  std::string table = falldet::render_compare_table(rows);
  json j = json::array();
  for (const auto& r : rows) {
    json row = report_summary(r.test_report);
    row["configuration"] = r.configuration;
    row["model"] = r.model;
    j.push_back(row);
  }
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw falldet::DataError(falldet::cat("cannot write ", out_path));
    f << table;
  }
  emit(json_out, j, table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"falldet: multimodal fall-detection pipeline"};
  app.require_subcommand(1);

  bool json_out = false;
  app.add_flag("--json", json_out, "machine-readable JSON on stdout");
  app.fallthrough();

  auto* synth = app.add_subcommand("synth", "generate synthetic raw sensor/camera data");
  std::string synth_out;
  int n_per_class = 50;
  uint64_t synth_seed = 42;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n-per-class", n_per_class, "samples per class");
  synth->add_option("--seed", synth_seed, "generator seed");

  auto* prepare = app.add_subcommand("prepare", "ingest, clean, align, and write a dataset file");
  std::string sensors_csv, cam1_dir, cam2_dir, prep_out, manifest_path;
  double max_gap = 0.5;
  prepare->add_option("--sensors", sensors_csv, "consolidated sensor CSV")->required();
  prepare->add_option("--cam1", cam1_dir, "camera 1 image directory")->required();
  prepare->add_option("--cam2", cam2_dir, "camera 2 image directory")->required();
  prepare->add_option("--out", prep_out, "aligned dataset output file")->required();
  prepare->add_option("--manifest", manifest_path, "column manifest JSON (default: built-in)");
  prepare->add_option("--max-gap", max_gap, "max sensor/frame gap in seconds");

  auto* train = app.add_subcommand("train", "train a model from an experiment config");
  std::string config_path, train_out;
  uint64_t train_seed = 42;
  int repeats = 1;
  train->add_option("--config", config_path, "experiment config JSON")->required();
  train->add_option("--out", train_out, "override output directory");
  auto* seed_opt = train->add_option("--seed", train_seed, "override config seed");
  train->add_option("--repeats", repeats, "repeat with seeds seed..seed+N-1, report mean/std");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset split");
  std::string ckpt_path, eval_data, eval_split = "test", eval_out;
  evaluate->add_option("--checkpoint", ckpt_path, "checkpoint manifest")->required();
  evaluate->add_option("--data", eval_data, "aligned dataset file")->required();
  evaluate->add_option("--split", eval_split, "train, val, or test");
  evaluate->add_option("--out", eval_out, "write the report JSON here");

  auto* compare = app.add_subcommand("compare", "render a comparison table from run records");
  std::vector<std::string> run_paths;
  std::string compare_out;
  compare->add_option("runs", run_paths, "run.json files")->required();
  compare->add_option("--out", compare_out, "write the table here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(synth_out, n_per_class, synth_seed, json_out);
    if (*prepare) {
      return run_prepare(sensors_csv, cam1_dir, cam2_dir, prep_out, manifest_path, max_gap, json_out);
    }
    if (*train) {
      return run_train(config_path, train_out, seed_opt->count() > 0, train_seed, repeats, json_out);
    }
    if (*evaluate) return run_evaluate(ckpt_path, eval_data, eval_split, eval_out, json_out);
    if (*compare) return run_compare(run_paths, compare_out, json_out);
  } catch (const std::exception& e) {
    if (json_out) {
      std::cout << json{{"error", e.what()}}.dump(2) << std::endl;
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
