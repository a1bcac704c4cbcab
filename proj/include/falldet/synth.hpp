#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "falldet/common.hpp"
#include "falldet/dataio.hpp"
#include "falldet/image.hpp"

namespace falldet {

struct SynthOptions {
  double sensor_sigma = 0.5;        // within-class feature noise
  double sensor_corrupt_prob = 0.12;  // chance a row's features carry no class signal
  double occlusion_prob = 0.12;       // per camera: rectangle faded into the noise
  double rate_hz = 18.0;
  double frame_jitter = 0.010;  // seconds, uniform +- around the sensor tick
  int raw_side = 64;            // raw image side before the 32x32 resize
};

/// Synthetic multimodal streams plus ground-truth degradation flags. The
/// flags record which rows were generated without class signal in a given
/// modality; they exist for tests and are not part of any file format.
struct SynthData {
  std::vector<SensorRecord> sensors;
  std::vector<FrameRecord> cam1, cam2;
  std::vector<ImageU8> raw_cam1, raw_cam2;  // pre-resize images, parallel to sensors
  std::vector<std::array<double, kNumSensorFeatures>> class_means;  // per class
  std::vector<uint8_t> sensor_corrupted, cam1_occluded, cam2_occluded;
};

namespace detail {

struct RectSpec {
  int x0, y0, w, h;
};

/// Rectangle position/size keyed to the class: positions walk a 4x3 grid,
/// sizes cycle with the class index.
inline RectSpec class_rect(int cls, int side) {
  int gx = cls % 4;
  int gy = cls / 4;
  RectSpec r;
  r.w = 14 + 2 * (cls % 3);
  r.h = 12 + 2 * (cls % 4);
  int cell_w = (side - 8) / 4;
  int cell_h = (side - 8) / 3;
  r.x0 = 4 + gx * cell_w + (cell_w - r.w) / 2;
  r.y0 = 4 + gy * cell_h + (cell_h - r.h) / 2;
  return r;
}

inline ImageU8 render_frame(int cls, bool mirrored, bool occluded, Rng& rng, const SynthOptions& opt) {
  ImageU8 img;
  img.width = opt.raw_side;
  img.height = opt.raw_side;
  img.channels = 1;
  img.pixels.resize(static_cast<size_t>(opt.raw_side) * opt.raw_side);
  std::uniform_int_distribution<int> noise(0, 90);
  std::uniform_int_distribution<int> jitter(occluded ? -6 : -3, occluded ? 6 : 3);
  std::uniform_int_distribution<int> bright(170, 255);
  int dx = jitter(rng), dy = jitter(rng);
  int level = bright(rng);
  if (occluded) level = static_cast<int>(level * 0.25);  // fades into the background
  for (auto& p : img.pixels) p = static_cast<uint8_t>(noise(rng));
  RectSpec r = class_rect(cls, opt.raw_side);
  int x0 = mirrored ? opt.raw_side - (r.x0 + r.w) : r.x0;
  x0 = std::clamp(x0 + dx, 0, opt.raw_side - r.w);
  int y0 = std::clamp(r.y0 + dy, 0, opt.raw_side - r.h);
  for (int y = y0; y < y0 + r.h; ++y) {
    for (int x = x0; x < x0 + r.w; ++x) {
      img.pixels[static_cast<size_t>(y) * opt.raw_side + x] = static_cast<uint8_t>(level);
    }
  }
  return img;
}

inline FrameRecord preprocess_frame(const ImageU8& raw, double t, int camera_id) {
  FrameRecord fr;
  fr.camera_id = camera_id;
  fr.timestamp = t;
  GrayImage g = scale_pixels(resize_32(to_grayscale(raw)));
  std::transform(g.values.begin(), g.values.end(), fr.pixels.begin(),
                 [](double v) { return static_cast<float>(v); });
  return fr;
}

}  // namespace detail

/// Fully seeded 12-class generator. Sensor features are class-conditional
/// Gaussians; each camera renders the class rectangle (camera 2 mirrored) on
/// a noisy background. Sensors tick at rate_hz; frames share the tick with a
/// small jitter so alignment is exercised. Degraded rows (corrupted sensors,
/// occluded cameras) are drawn independently per modality, which keeps any
/// single modality imperfect while the three together stay separable.
inline SynthData synth_generate(int n_per_class, uint64_t seed, const SynthOptions& opt = {}) {
  if (n_per_class < 1) throw ValueError("synth_generate: n_per_class must be >= 1");
  if (opt.frame_jitter * 2.0 >= 1.0 / opt.rate_hz) {
    // keeps frame order equal to generation order, so raw image i pairs with frame i
    throw ValueError("synth_generate: frame jitter must stay below half the sample period");
  }
  Rng rng = make_rng(seed);
  SynthData out;

  std::uniform_real_distribution<double> mean_dist(-1.5, 1.5);
  out.class_means.resize(kNumClasses);
  for (int c = 0; c < kNumClasses; ++c) {
    for (int d = 0; d < kNumSensorFeatures; ++d) out.class_means[static_cast<size_t>(c)][static_cast<size_t>(d)] = mean_dist(rng);
  }

  // Raw activity ids: classes 0..10 are activities 1..11, class 11 is the
  // no-activity id 20 (matching the default label map).
  auto raw_id_for_class = [](int cls) { return cls == 11 ? 20 : cls + 1; };

  int n = n_per_class * kNumClasses;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> feat_noise(0.0, opt.sensor_sigma);
  std::normal_distribution<double> corrupt_noise(0.0, 2.0);
  std::uniform_real_distribution<double> jit(-opt.frame_jitter, opt.frame_jitter);
  const double t0 = 10.0;  // keep all epoch-millisecond stamps positive

  for (int i = 0; i < n; ++i) {
    int cls = i / n_per_class;
    SensorRecord rec;
    rec.timestamp = t0 + static_cast<double>(i) / opt.rate_hz;
    rec.raw_label = raw_id_for_class(cls);
    bool corrupted = unit(rng) < opt.sensor_corrupt_prob;
    for (int d = 0; d < kNumSensorFeatures; ++d) {
      double v = corrupted ? corrupt_noise(rng)
                           : out.class_means[static_cast<size_t>(cls)][static_cast<size_t>(d)] + feat_noise(rng);
      rec.features[static_cast<size_t>(d)] = static_cast<float>(v);
    }
    out.sensors.push_back(rec);
    out.sensor_corrupted.push_back(corrupted ? 1 : 0);

    for (int cam = 1; cam <= 2; ++cam) {
      double tq = rec.timestamp + jit(rng);
      tq = std::round(tq * 1000.0) / 1000.0;  // frames are stamped in epoch millis
      bool occluded = unit(rng) < opt.occlusion_prob;
      ImageU8 raw = detail::render_frame(cls, cam == 2, occluded, rng, opt);
      FrameRecord fr = detail::preprocess_frame(raw, tq, cam);
      if (cam == 1) {
        out.raw_cam1.push_back(std::move(raw));
        out.cam1.push_back(std::move(fr));
        out.cam1_occluded.push_back(occluded ? 1 : 0);
      } else {
        out.raw_cam2.push_back(std::move(raw));
        out.cam2.push_back(std::move(fr));
        out.cam2_occluded.push_back(occluded ? 1 : 0);
      }
    }
  }

  auto by_time = [](const FrameRecord& a, const FrameRecord& b) { return a.timestamp < b.timestamp; };
  std::sort(out.cam1.begin(), out.cam1.end(), by_time);
  std::sort(out.cam2.begin(), out.cam2.end(), by_time);
  return out;
}

/// Convenience: generate, align, and return supervised samples.
inline std::vector<AlignedSample> synth_aligned(int n_per_class, uint64_t seed,
                                                const SynthOptions& opt = {}) {
  SynthData data = synth_generate(n_per_class, seed, opt);
  return align(data.sensors, data.cam1, data.cam2).samples;
}

/// Write the raw ingest layout the prepare pipeline consumes: sensors.csv in
/// the consolidated-CSV column layout plus cam1/ and cam2/ directories of
/// <epoch_millis>.pgm frames.
inline void synth_write_raw(const std::string& dir, const SynthData& data) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "cam1");
  fs::create_directories(fs::path(dir) / "cam2");

  ColumnManifest manifest = default_column_manifest();
  std::ofstream csv(fs::path(dir) / "sensors.csv", std::ios::trunc);
  if (!csv) throw DataError(cat("cannot write ", dir, "/sensors.csv"));
  csv << manifest.time_column;
  for (const auto& c : manifest.feature_columns) csv << "," << c;
  csv << ",Subject,Activity,Trial," << manifest.label_column << "\n";
  char buf[64];
  for (const auto& rec : data.sensors) {
    std::snprintf(buf, sizeof(buf), "%.6f", rec.timestamp);
    csv << buf;
    for (float v : rec.features) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
      csv << "," << buf;
    }
    csv << ",1," << rec.raw_label << ",1," << rec.raw_label << "\n";
  }
  csv.close();

  for (int cam = 1; cam <= 2; ++cam) {
    const auto& frames = cam == 1 ? data.cam1 : data.cam2;
    const auto& raws = cam == 1 ? data.raw_cam1 : data.raw_cam2;
    // jitter stays below half a tick, so frame i is raw image i
    for (size_t i = 0; i < frames.size(); ++i) {
      long long ms = std::llround(frames[i].timestamp * 1000.0);
      fs::path p = fs::path(dir) / cat("cam", cam) / cat(ms, ".pgm");
      save_pgm(p.string(), raws[i]);
    }
  }
}

}  // namespace falldet
