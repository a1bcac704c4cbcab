// Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
// Run via ctest or directly; criterion 8 needs a user-supplied dataset and
// is skipped unless UPFALL_CSV is set.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "falldet/experiment.hpp"
#include "falldet/gradcheck.hpp"
#include "falldet/models.hpp"
#include "falldet/synth.hpp"
#include "falldet/trees.hpp"

using namespace falldet;
namespace fs = std::filesystem;

namespace {

void verdict(int criterion, const std::string& name, bool ok, const std::string& detail = "") {
  std::cout << "[ACCEPTANCE] criterion " << criterion << " (" << name
            << "): " << (ok ? "PASS" : "FAIL");
  if (!detail.empty()) std::cout << " | " << detail;
  std::cout << std::endl;
  EXPECT_TRUE(ok) << "criterion " << criterion << " (" << name << ") " << detail;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor<double> normal_tensor(const Shape& shape, Rng& rng, double sigma = 1.0) {
  Tensor<double> t(shape);
  std::normal_distribution<double> dist(0.0, sigma);
  for (long long i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

std::vector<int> cycle_labels(int n, int k) {
  std::vector<int> y(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) y[static_cast<size_t>(i)] = i % k;
  return y;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

// ---------------------------------------------------------------------------
// 1. Gradient suite: every layer kind and every architecture at reduced input
//    sizes, rel. err < 1e-4 in 64-bit mode, under two minutes.

TEST(Acceptance, C1GradientSuite) {
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  std::string worst_at;
  auto track = [&](const std::string& name, const GradCheckResult& r) {
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_at = name + "/" + r.worst_param;
    }
  };

  {
    // every layer kind in one two-branch network (concat included)
    ModelSpec spec;
    spec.name = "kitchen-sink";
    spec.branches = {{LayerSpec::conv2d(3, 3, 3), LayerSpec::relu(), LayerSpec::batchnorm(),
                      LayerSpec::maxpool2d(2, 2), LayerSpec::flatten()},
                     {LayerSpec::conv1d(4, 3), LayerSpec::relu(), LayerSpec::maxpool1d(2),
                      LayerSpec::batchnorm(), LayerSpec::flatten()}};
    spec.input_shapes = {{1, 9, 9}, {1, 11}};
    spec.inputs = {BranchInput::Camera, BranchInput::SensorSequence};
    spec.head = {LayerSpec::dense(10), LayerSpec::relu(), LayerSpec::dropout(0.2),
                 LayerSpec::dense(12), LayerSpec::softmax()};
    Network<double> net = Network<double>::build(spec, 71);
    Rng rng = make_rng(71);
    track("kitchen-sink", grad_check(net, {normal_tensor({4, 1, 9, 9}, rng),
                                           normal_tensor({4, 1, 11}, rng)},
                                     cycle_labels(4, 12)));
  }

  GradCheckOptions sampled;
  sampled.max_coords_per_tensor = 80;
  sampled.sample_seed = 7;
  // near-zero gradients (dead relu paths through wide layers) sit below the
  // double-precision finite-difference noise; they are consistency-checked
  // against the floor instead of ratio-tested
  sampled.zero_grad_floor = 2e-6;

  {
    // batch 8 and a wide input spread keep the 2000-unit layer away from
    // near-dead relu units whose true gradients sit at the rel-err floor
    Network<double> net = Network<double>::build(build_sensor_mlp(), 72);
    Rng rng = make_rng(72);
    track("sensor-mlp",
          grad_check(net, {normal_tensor({8, 28}, rng, 3.0)}, cycle_labels(8, 12), sampled));
  }
  {
    ModelSpec spec = build_cam_cnn();
    spec.input_shapes = {{1, 8, 8}};
    Network<double> net = Network<double>::build(spec, 73);
    Rng rng = make_rng(73);
    track("cam-cnn@8x8",
          grad_check(net, {normal_tensor({6, 1, 8, 8}, rng)}, cycle_labels(6, 12), sampled));
  }
  {
    ModelSpec spec = build_dual_cam_cnn();
    spec.input_shapes = {{1, 8, 8}, {1, 8, 8}};
    Network<double> net = Network<double>::build(spec, 74);
    Rng rng = make_rng(74);
    track("dual-cam-cnn@8x8",
          grad_check(net, {normal_tensor({6, 1, 8, 8}, rng), normal_tensor({6, 1, 8, 8}, rng)},
                     cycle_labels(6, 12), sampled));
  }
  {
    ModelSpec spec = build_fusion();
    spec.input_shapes = {{1, 8, 8}, {1, 8, 8}, {1, 28}};
    Network<double> net = Network<double>::build(spec, 75);
    Rng rng = make_rng(75);
    track("fusion@8x8",
          grad_check(net,
                     {normal_tensor({6, 1, 8, 8}, rng), normal_tensor({6, 1, 8, 8}, rng),
                      normal_tensor({6, 1, 28}, rng)},
                     cycle_labels(6, 12), sampled));
  }
  {
    ModelSpec spec = build_baseline_cnn();
    spec.input_shapes = {{1, 22, 22}};
    Network<double> net = Network<double>::build(spec, 76);
    Rng rng = make_rng(76);
    track("baseline-cnn@22x22",
          grad_check(net, {normal_tensor({6, 1, 22, 22}, rng)}, cycle_labels(6, 12), sampled));
  }

  double elapsed = seconds_since(t0);
  bool ok = worst < 1e-4 && elapsed < 120.0;
  verdict(1, "gradient suite", ok,
          cat("max rel err ", worst, " at ", worst_at, ", ", elapsed, " s"));
}

// ---------------------------------------------------------------------------
// 2. Shape suite: derived widths and parameter counts, exact.

TEST(Acceptance, C2ShapeSuite) {
  long long mlp_params = 28 * 2000 + 2000 + 2 * 2000 + 2000 * 600 + 600 + 2 * 600 + 600 * 12 + 12;
  bool ok = true;
  std::string detail;

  ok &= spec_param_count(build_sensor_mlp()) == mlp_params;
  Network<float> mlp = Network<float>::build(build_sensor_mlp(), 1);
  ok &= mlp.param_count() == mlp_params;
  detail += cat("mlp params ", mlp.param_count(), " (expected ", mlp_params, ")");

  ModelSpec cam = build_cam_cnn();
  Shape s = cam.input_shapes[0];
  for (size_t i = 0; i < 5; ++i) s = layer_output_shape(cam.branches[0][i], s);
  ok &= s == Shape{3600};
  detail += cat(", cam flatten ", s[0]);

  ok &= build_dual_cam_cnn().concat_width() == 6750;
  detail += cat(", dual concat ", build_dual_cam_cnn().concat_width());

  ok &= build_fusion().concat_width() == 6880;
  detail += cat(", fusion concat ", build_fusion().concat_width());

  ModelSpec base = build_baseline_cnn();
  Shape b = base.input_shapes[0];
  for (size_t i = 0; i < 10; ++i) b = layer_output_shape(base.branches[0][i], b);
  ok &= b == Shape{128};
  detail += cat(", baseline flatten ", b[0]);

  verdict(2, "shape suite", ok, detail);
}

// ---------------------------------------------------------------------------
// 3. Overfit suite: 12 classes x 50 samples; the four proposed models reach
//    99% train accuracy within 60 epochs; the baseline preset reaches 60%.

namespace {

struct OverfitResult {
  double accuracy = 0;
  int epochs = 0;
};

OverfitResult overfit_model(const std::string& model, DataConfig config,
                            const std::vector<AlignedSample>& samples, const TrainConfig& base_cfg) {
  ModelSpec spec = build_model(model);
  Network<float> net = Network<float>::build(spec, 42);
  ModelData data = make_model_data(samples, model, config);
  TrainConfig cfg = base_cfg;
  cfg.checkpoint_metric = "accuracy";
  cfg.stop_at_metric = 0.99;
  cfg.seed = 42;
  TrainResult res = train(net, data, data, cfg);
  OverfitResult out;
  out.epochs = res.epochs_run;
  out.accuracy = evaluate(net, data).accuracy;
  return out;
}

}  // namespace

TEST(Acceptance, C3OverfitSuite) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<AlignedSample> samples = synth_aligned(50, 42);
  ASSERT_EQ(samples.size(), 600u);
  StandardizationStats st = fit_standardization(samples);
  apply_standardization(st, samples);

  TrainConfig adam;
  adam.optimizer = "adam";
  adam.lr = 1e-3;
  adam.batch_size = 64;
  adam.max_epochs = 60;
  adam.patience = 60;

  bool ok = true;
  std::string detail;
  struct Item {
    const char* model;
    DataConfig config;
  };
  for (const Item& item : {Item{"sensor-mlp", DataConfig::S}, Item{"cam-cnn", DataConfig::C1},
                           Item{"dual-cam-cnn", DataConfig::C1C2},
                           Item{"fusion", DataConfig::SC1C2}}) {
    OverfitResult r = overfit_model(item.model, item.config, samples, adam);
    std::cout << "  overfit " << item.model << ": train acc " << r.accuracy << " after "
              << r.epochs << " epochs" << std::endl;
    ok &= r.accuracy >= 0.99;
    detail += cat(item.model, " ", r.accuracy, " (", r.epochs, " ep), ");
  }

  // prior-work baseline with its published preset: SGD lr 0.001, L2 0.004,
  // 5 epochs, batch 100. On 600 samples that is 30 optimizer steps total;
  // the logits barely move from their random initialization, so this clause
  // is expected to fail at this dataset size (see docs/ledger).
  TrainConfig preset = baseline_cnn_train_config();
  preset.stop_at_metric = 0.99;
  OverfitResult base = overfit_model("baseline-cnn", DataConfig::C1, samples, preset);
  std::cout << "  overfit baseline-cnn (preset): train acc " << base.accuracy << " after "
            << base.epochs << " epochs" << std::endl;
  bool baseline_ok = base.accuracy >= 0.60;
  detail += cat("baseline-cnn preset clause ", base.accuracy,
                baseline_ok ? " >= 0.60" : " < 0.60 (30 SGD steps at lr 0.001 on 600 samples)");

  double elapsed = seconds_since(t0);
  ok &= baseline_ok && elapsed < 600.0;
  verdict(3, "overfit suite", ok, detail + cat(", ", elapsed, " s"));
}

// ---------------------------------------------------------------------------
// 4. Generalization smoke: fusion beats every single-modality model on the
//    same seed and reaches test accuracy 0.95.

namespace {

double train_and_test(const std::string& model, DataConfig config, const DatasetSplit& split) {
  ModelSpec spec = build_model(model);
  Network<float> net = Network<float>::build(spec, 42);
  ModelData train_data = make_model_data(split.train, model, config);
  ModelData val_data = make_model_data(split.val, model, config);
  ModelData test_data = make_model_data(split.test, model, config);
  TrainConfig cfg;
  cfg.optimizer = "adam";
  cfg.lr = 1e-3;
  cfg.batch_size = 64;
  cfg.max_epochs = 25;
  cfg.patience = 6;
  cfg.seed = 42;
  train(net, train_data, val_data, cfg);
  return evaluate(net, test_data).accuracy;
}

}  // namespace

TEST(Acceptance, C4GeneralizationSmoke) {
  std::vector<AlignedSample> samples = synth_aligned(50, 42);
  DatasetSplit split = split_dataset(samples, 42);
  StandardizationStats st = fit_standardization(split.train);
  apply_standardization(st, split.train);
  apply_standardization(st, split.val);
  apply_standardization(st, split.test);

  double fusion_acc = train_and_test("fusion", DataConfig::SC1C2, split);
  double sensor_acc = train_and_test("sensor-mlp", DataConfig::S, split);
  double cam1_acc = train_and_test("cam-cnn", DataConfig::C1, split);
  double cam2_acc = train_and_test("cam-cnn", DataConfig::C2, split);

  std::cout << "  test accuracy: fusion " << fusion_acc << ", sensor-mlp " << sensor_acc
            << ", cam-cnn C1 " << cam1_acc << ", cam-cnn C2 " << cam2_acc << std::endl;
  bool ok = fusion_acc >= 0.95 && fusion_acc > sensor_acc && fusion_acc > cam1_acc &&
            fusion_acc > cam2_acc;
  verdict(4, "generalization smoke", ok,
          cat("fusion ", fusion_acc, " vs S ", sensor_acc, ", C1 ", cam1_acc, ", C2 ", cam2_acc));
}

// ---------------------------------------------------------------------------
// 5. Oracle suite: stump search and KNN equal exhaustive oracles; metrics
//    match hand counts; GBT train log-loss never increases.

namespace {

StumpSearchResult oracle_best_stump(const Tensor<float>& x, const std::vector<double>& g,
                                    const std::vector<double>& h, double lambda) {
  int n = x.dim(0), d = x.dim(1);
  double g_total = 0, h_total = 0;
  for (int i = 0; i < n; ++i) {
    g_total += g[static_cast<size_t>(i)];
    h_total += h[static_cast<size_t>(i)];
  }
  StumpSearchResult best;
  for (int f = 0; f < d; ++f) {
    std::vector<std::pair<float, int>> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = {x(i, f), i};
    std::sort(order.begin(), order.end());
    for (int p = 0; p + 1 < n; ++p) {
      if (order[static_cast<size_t>(p)].first == order[static_cast<size_t>(p + 1)].first) continue;
      double gl = 0, hl = 0;
      for (int q = 0; q <= p; ++q) {
        gl += g[static_cast<size_t>(order[static_cast<size_t>(q)].second)];
        hl += h[static_cast<size_t>(order[static_cast<size_t>(q)].second)];
      }
      double gr = g_total - gl, hr = h_total - hl;
      double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                           g_total * g_total / (h_total + lambda));
      if (gain > best.gain + 1e-12) {
        best.found = true;
        best.feature = f;
        best.threshold = (static_cast<double>(order[static_cast<size_t>(p)].first) +
                          order[static_cast<size_t>(p + 1)].first) /
                         2.0;
        best.gain = gain;
      }
    }
  }
  return best;
}

}  // namespace

TEST(Acceptance, C5OracleSuite) {
  bool ok = true;
  std::string detail;

  // stump search vs exhaustive oracle, 100 random instances
  {
    Rng rng = make_rng(501);
    std::uniform_int_distribution<int> n_pick(6, 40), d_pick(1, 6);
    std::normal_distribution<double> gh(0.0, 1.0);
    std::uniform_real_distribution<float> xv(-3.0f, 3.0f);
    int agree = 0;
    for (int trial = 0; trial < 100; ++trial) {
      int n = n_pick(rng), d = d_pick(rng);
      Tensor<float> x({n, d});
      for (long long i = 0; i < x.size(); ++i) x[i] = xv(rng);
      std::vector<double> g(static_cast<size_t>(n)), h(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        g[static_cast<size_t>(i)] = gh(rng);
        h[static_cast<size_t>(i)] = std::abs(gh(rng)) + 0.01;
      }
      StumpSearchResult engine = gbt_best_stump(x, g, h, 1.0);
      StumpSearchResult oracle = oracle_best_stump(x, g, h, 1.0);
      bool same = engine.found == oracle.found &&
                  (!engine.found || (engine.feature == oracle.feature &&
                                     engine.threshold == oracle.threshold));
      agree += same;
    }
    ok &= agree == 100;
    detail += cat("stump oracle ", agree, "/100");
  }

  // knn vs exhaustive sort-and-vote oracle, 100 random instances
  {
    Rng rng = make_rng(502);
    std::uniform_real_distribution<float> xv(-5.0f, 5.0f);
    std::uniform_int_distribution<int> label(0, 11);
    int agree = 0;
    for (int trial = 0; trial < 100; ++trial) {
      int n = 40, d = 5, k = 5;
      Tensor<float> train({n, d});
      for (long long i = 0; i < train.size(); ++i) train[i] = xv(rng);
      std::vector<int> y(static_cast<size_t>(n));
      for (auto& v : y) v = label(rng);
      Tensor<float> q({1, d});
      for (int j = 0; j < d; ++j) q(0, j) = xv(rng);
      int pred = knn_predict(train, y, q, k)[0];

      std::vector<std::pair<double, int>> dist;
      for (int i = 0; i < n; ++i) {
        double acc = 0;
        for (int j = 0; j < d; ++j) {
          double diff = static_cast<double>(train(i, j)) - q(0, j);
          acc += diff * diff;
        }
        dist.push_back({acc, i});
      }
      std::sort(dist.begin(), dist.end());
      std::vector<int> votes(12, 0);
      for (int i = 0; i < k; ++i) ++votes[static_cast<size_t>(y[static_cast<size_t>(dist[static_cast<size_t>(i)].second)])];
      int want = 0;
      for (int c = 1; c < 12; ++c) {
        if (votes[static_cast<size_t>(c)] > votes[static_cast<size_t>(want)]) want = c;
      }
      agree += pred == want;
    }
    ok &= agree == 100;
    detail += cat(", knn oracle ", agree, "/100");
  }

  // metrics vs hand-counted confusion matrices, 1e-12
  {
    ConfusionMatrix cm(2);
    cm.add(0, 0);
    cm.add(0, 1);
    cm.add(1, 1);
    EvalReport r = report(cm);
    bool metrics_ok = std::abs(r.per_class[0].precision - 1.0) < 1e-12 &&
                      std::abs(r.per_class[0].recall - 0.5) < 1e-12 &&
                      std::abs(r.per_class[0].f1 - 2.0 / 3) < 1e-12 &&
                      std::abs(r.per_class[1].precision - 0.5) < 1e-12 &&
                      std::abs(r.per_class[1].recall - 1.0) < 1e-12 &&
                      std::abs(r.accuracy - 2.0 / 3) < 1e-12 &&
                      std::abs(r.accuracy - r.weighted_recall) < 1e-12;
    ok &= metrics_ok;
    detail += cat(", metrics ", metrics_ok ? "exact" : "off");
  }

  // GBT train log-loss nonincreasing on a real fit
  {
    std::vector<AlignedSample> samples = synth_aligned(15, 9);
    StandardizationStats st = fit_standardization(samples);
    apply_standardization(st, samples);
    Tensor<float> x = sensor_matrix(samples);
    std::vector<int> y = label_vector(samples);
    GBTConfig cfg;
    cfg.n_estimators = 20;
    cfg.learning_rate = 0.5;
    cfg.max_depth = 4;
    GBTModel m = gbt_fit(x, y, cfg);
    bool monotone = true;
    double prev = std::log(12.0);
    for (double loss : m.train_loss) {
      monotone &= loss <= prev + 1e-9;
      prev = loss;
    }
    ok &= monotone;
    detail += cat(", gbt loss monotone ", monotone ? "yes" : "no");
  }

  verdict(5, "oracle suite", ok, detail);
}

// ---------------------------------------------------------------------------
// 6. Data pipeline suite.

TEST(Acceptance, C6DataPipelineSuite) {
  bool ok = true;
  std::string detail;

  // alignment equals the brute-force nearest-timestamp oracle
  {
    Rng rng = make_rng(601);
    std::uniform_real_distribution<double> t_pick(0.0, 20.0);
    int mismatches = 0;
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<FrameRecord> cam1, cam2;
      for (int i = 0; i < 15; ++i) {
        FrameRecord f;
        f.timestamp = t_pick(rng);
        f.camera_id = 1;
        f.pixels[0] = static_cast<float>(i) / 32;
        cam1.push_back(f);
        FrameRecord g = f;
        g.camera_id = 2;
        g.timestamp = t_pick(rng);
        g.pixels[0] = static_cast<float>(i) / 64;
        cam2.push_back(g);
      }
      auto by_time = [](const FrameRecord& a, const FrameRecord& b) {
        return a.timestamp < b.timestamp;
      };
      std::sort(cam1.begin(), cam1.end(), by_time);
      std::sort(cam2.begin(), cam2.end(), by_time);
      std::vector<SensorRecord> sensors;
      for (int i = 0; i < 30; ++i) {
        SensorRecord s;
        s.timestamp = t_pick(rng);
        s.raw_label = 1;
        sensors.push_back(s);
      }
      AlignResult res = align(sensors, cam1, cam2, 1e9);
      for (size_t s = 0; s < sensors.size(); ++s) {
        for (const auto* cam : {&cam1, &cam2}) {
          double best = 1e18;
          size_t best_i = 0;
          for (size_t i = 0; i < cam->size(); ++i) {
            double gap = std::abs((*cam)[i].timestamp - sensors[s].timestamp);
            if (gap < best) {
              best = gap;
              best_i = i;
            }
          }
          float chosen = cam == &cam1 ? res.samples[s].cam1[0] : res.samples[s].cam2[0];
          if (chosen != (*cam)[best_i].pixels[0]) ++mismatches;
        }
      }
    }
    ok &= mismatches == 0;
    detail += cat("align mismatches ", mismatches);
  }

  // standardized train features: mean 0 +- 1e-6, std 1 +- 1e-6
  {
    std::vector<AlignedSample> samples = synth_aligned(20, 5);
    DatasetSplit split = split_dataset(samples, 5);
    StandardizationStats st = fit_standardization(split.train);
    apply_standardization(st, split.train);
    double worst_mean = 0, worst_sd = 0;
    for (int f = 0; f < kNumSensorFeatures; ++f) {
      double mean = 0, sq = 0;
      for (const auto& s : split.train) mean += s.sensor[static_cast<size_t>(f)];
      mean /= static_cast<double>(split.train.size());
      for (const auto& s : split.train) {
        double d = s.sensor[static_cast<size_t>(f)] - mean;
        sq += d * d;
      }
      double sd = std::sqrt(sq / static_cast<double>(split.train.size()));
      worst_mean = std::max(worst_mean, std::abs(mean));
      worst_sd = std::max(worst_sd, std::abs(sd - 1.0));
    }
    ok &= worst_mean < 1e-6 && worst_sd < 1e-6;
    detail += cat(", standardization |mean| ", worst_mean, " |sd-1| ", worst_sd);
  }

  // grayscale equation to 1e-6
  {
    ImageU8 img;
    img.width = 2;
    img.height = 1;
    img.channels = 3;
    img.pixels = {100, 50, 200, 255, 255, 255};
    GrayImage g = to_grayscale(img);
    bool gray_ok = std::abs(g.at(0, 0) - 82.05) < 1e-6 && std::abs(g.at(0, 1) - 255.0) < 1e-6;
    GrayImage scaled = scale_pixels(g);
    gray_ok &= std::abs(scaled.at(0, 0) - 82.05 / 255.0) < 1e-9;
    ok &= gray_ok;
    detail += cat(", grayscale ", gray_ok ? "exact" : "off");
  }

  // stratified 60/20/20 within one sample per class
  {
    std::vector<AlignedSample> samples = synth_aligned(50, 7);
    DatasetSplit split = split_dataset(samples, 7);
    bool split_ok = true;
    for (int c = 0; c < 12; ++c) {
      auto count = [&](const std::vector<AlignedSample>& part) {
        return static_cast<long long>(
            std::count_if(part.begin(), part.end(),
                          [&](const AlignedSample& s) { return s.label == c; }));
      };
      split_ok &= std::llabs(count(split.train) - 30) <= 1;
      split_ok &= std::llabs(count(split.val) - 10) <= 1;
      split_ok &= std::llabs(count(split.test) - 10) <= 1;
    }
    ok &= split_ok;
    detail += cat(", split counts ", split_ok ? "within 1" : "off");
  }

  // prepare -> load round trip preserves counts and bytes
  {
    fs::path dir = fs::temp_directory_path() / "falldet_accept_prepare";
    fs::remove_all(dir);
    fs::create_directories(dir);
    SynthData data = synth_generate(10, 3);
    synth_write_raw(dir.string(), data);

    auto run_prepare = [&](const fs::path& out) {
      CsvLoadResult loaded = load_consolidated_csv((dir / "sensors.csv").string());
      CleanResult cleaned = clean(loaded.records);
      FrameDirResult f1 = load_frames_dir((dir / "cam1").string(), 1);
      FrameDirResult f2 = load_frames_dir((dir / "cam2").string(), 2);
      AlignResult aligned = align(cleaned.records, f1.frames, f2.frames);
      write_aligned_file(out.string(), aligned.samples);
      return aligned.samples.size();
    };
    size_t count1 = run_prepare(dir / "a.fald");
    size_t count2 = run_prepare(dir / "b.fald");
    std::vector<AlignedSample> back = read_aligned_file((dir / "a.fald").string());
    bool prep_ok = count1 == data.sensors.size() && count2 == count1 &&
                   back.size() == count1 && slurp(dir / "a.fald") == slurp(dir / "b.fald");
    ok &= prep_ok;
    detail += cat(", prepare round trip ", prep_ok ? "byte-identical" : "broken", " (", count1,
                  " samples)");
    fs::remove_all(dir);
  }

  verdict(6, "data pipeline suite", ok, detail);
}

// ---------------------------------------------------------------------------
// 7. Determinism: same config + seed -> bit-identical checkpoints and metric
//    reports.

TEST(Acceptance, C7Determinism) {
  fs::path d1 = fs::temp_directory_path() / "falldet_accept_det1";
  fs::path d2 = fs::temp_directory_path() / "falldet_accept_det2";
  fs::remove_all(d1);
  fs::remove_all(d2);

  ExperimentConfig cfg;
  cfg.synth_n_per_class = 8;
  cfg.configuration = DataConfig::S;
  cfg.model = "sensor-mlp";
  cfg.train.max_epochs = 3;
  cfg.train.batch_size = 16;
  cfg.seed = 11;
  cfg.out_dir = d1.string();
  run_experiment(cfg);
  cfg.out_dir = d2.string();
  run_experiment(cfg);

  bool manifest_ok = slurp(d1 / "checkpoint.json") == slurp(d2 / "checkpoint.json");
  bool weights_ok = slurp(d1 / "checkpoint.bin") == slurp(d2 / "checkpoint.bin");
  bool report_ok = slurp(d1 / "report_test.json") == slurp(d2 / "report_test.json") &&
                   slurp(d1 / "report_val.json") == slurp(d2 / "report_val.json");
  bool nonempty = !slurp(d1 / "checkpoint.bin").empty();
  bool ok = manifest_ok && weights_ok && report_ok && nonempty;
  verdict(7, "determinism", ok,
          cat("manifest ", manifest_ok, ", weights ", weights_ok, ", reports ", report_ok));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

// ---------------------------------------------------------------------------
// 8. Optional real-data criterion: requires UPFALL_CSV pointing at the
//    consolidated UP-Fall export.

TEST(Acceptance, C8OptionalRealData) {
  const char* csv = std::getenv("UPFALL_CSV");
  if (!csv) {
    std::cout << "[ACCEPTANCE] criterion 8 (real data): SKIP | set UPFALL_CSV to run" << std::endl;
    GTEST_SKIP() << "UPFALL_CSV not set";
  }
  const char* manifest_env = std::getenv("UPFALL_MANIFEST");
  ColumnManifest manifest =
      manifest_env ? ColumnManifest::load(manifest_env) : default_column_manifest();

  CsvLoadResult loaded = load_consolidated_csv(csv, manifest);
  CleanResult cleaned = clean(loaded.records);
  long long rows = static_cast<long long>(cleaned.records.size());
  bool count_ok = rows == 258113;
  std::cout << "  cleaned rows: " << rows << " (expected 258113)" << std::endl;

  // sensors-only standardized 60/20/20 stratified split
  std::map<int, std::vector<int>> by_class;
  for (size_t i = 0; i < cleaned.records.size(); ++i) {
    by_class[manifest.label_map.at(cleaned.records[i].raw_label)].push_back(static_cast<int>(i));
  }
  Rng rng = make_rng(42);
  std::vector<int> train_idx, test_idx;
  for (auto& [cls, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    long long n = static_cast<long long>(idx.size());
    long long n_val = std::llround(0.2 * static_cast<double>(n));
    long long n_test = std::llround(0.2 * static_cast<double>(n));
    long long n_train = n - n_val - n_test;
    for (long long i = 0; i < n_train; ++i) train_idx.push_back(idx[static_cast<size_t>(i)]);
    for (long long i = n_train + n_val; i < n; ++i) test_idx.push_back(idx[static_cast<size_t>(i)]);
  }
  auto build_xy = [&](const std::vector<int>& idx, Tensor<float>& x, std::vector<int>& y) {
    x = Tensor<float>({static_cast<int>(idx.size()), kNumSensorFeatures});
    y.resize(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
      const SensorRecord& r = cleaned.records[static_cast<size_t>(idx[i])];
      std::copy(r.features.begin(), r.features.end(), x.data() + i * kNumSensorFeatures);
      y[i] = manifest.label_map.at(r.raw_label);
    }
  };
  Tensor<float> xtr, xte;
  std::vector<int> ytr, yte;
  build_xy(train_idx, xtr, ytr);
  build_xy(test_idx, xte, yte);

  // standardize with training moments
  std::array<double, kNumSensorFeatures> mean{}, sd{};
  for (int i = 0; i < xtr.dim(0); ++i) {
    for (int f = 0; f < kNumSensorFeatures; ++f) mean[static_cast<size_t>(f)] += xtr(i, f);
  }
  for (auto& m : mean) m /= xtr.dim(0);
  for (int i = 0; i < xtr.dim(0); ++i) {
    for (int f = 0; f < kNumSensorFeatures; ++f) {
      double d = xtr(i, f) - mean[static_cast<size_t>(f)];
      sd[static_cast<size_t>(f)] += d * d;
    }
  }
  for (auto& v : sd) v = std::sqrt(v / xtr.dim(0));
  auto standardize = [&](Tensor<float>& x) {
    for (int i = 0; i < x.dim(0); ++i) {
      for (int f = 0; f < kNumSensorFeatures; ++f) {
        x(i, f) = sd[static_cast<size_t>(f)] < 1e-12
                      ? 0.0f
                      : static_cast<float>((x(i, f) - mean[static_cast<size_t>(f)]) / sd[static_cast<size_t>(f)]);
      }
    }
  };
  standardize(xtr);
  standardize(xte);

  GBTModel model = gbt_fit(xtr, ytr, xgb_like_preset());
  TreePrediction pred = gbt_predict(model, xte);
  EvalReport rep = report(ConfusionMatrix::from(yte, pred.labels), "S");
  std::cout << "  xgb-like weighted F1 on test: " << rep.weighted_f1 << std::endl;
  bool f1_ok = rep.weighted_f1 >= 0.97;
  verdict(8, "real data", count_ok && f1_ok,
          cat("cleaned rows ", rows, ", weighted F1 ", rep.weighted_f1));
}
