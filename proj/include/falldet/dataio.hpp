#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "falldet/binio.hpp"
#include "falldet/common.hpp"
#include "falldet/image.hpp"

namespace falldet {

// ---------------------------------------------------------------------------
// Records

struct SensorRecord {
  double timestamp = 0;  // seconds
  std::array<float, kNumSensorFeatures> features{};
  int raw_label = 0;  // activity id as found in the file

  bool operator==(const SensorRecord& o) const {
    if (timestamp != o.timestamp || raw_label != o.raw_label) return false;
    for (int i = 0; i < kNumSensorFeatures; ++i) {
      // bit comparison so NaNs count as equal fields for dedup purposes
      if (std::memcmp(&features[static_cast<size_t>(i)], &o.features[static_cast<size_t>(i)], 4) != 0) {
        return false;
      }
    }
    return true;
  }
};

struct FrameRecord {
  double timestamp = 0;
  int camera_id = 1;  // 1 or 2
  std::array<float, kImagePixels> pixels{};  // 32x32, each in [0,1]
};

struct AlignedSample {
  double timestamp = 0;
  std::array<float, kNumSensorFeatures> sensor{};
  std::array<float, kImagePixels> cam1{};
  std::array<float, kImagePixels> cam2{};
  uint8_t label = 0;  // contiguous class index 0..11
};

// ---------------------------------------------------------------------------
// Column manifest: which CSV columns feed the 28 modeled features, and how
// raw activity ids map to contiguous class indices.

struct ColumnManifest {
  std::string time_column = "Time";
  std::string label_column = "Tag";
  std::vector<std::string> feature_columns;
  std::map<int, int> label_map;  // raw id -> class index

  void validate() const {
    if (static_cast<int>(feature_columns.size()) != kNumSensorFeatures) {
      throw ConfigError(cat("column manifest must select exactly ", kNumSensorFeatures,
                            " feature columns, got ", feature_columns.size()));
    }
    if (label_map.empty()) throw ConfigError("column manifest needs a label map");
    for (const auto& [raw, idx] : label_map) {
      if (idx < 0 || idx >= kNumClasses) {
        throw ConfigError(cat("label map: class index ", idx, " for raw id ", raw,
                              " outside [0,", kNumClasses, ")"));
      }
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json lm = nlohmann::json::object();
    for (const auto& [raw, idx] : label_map) lm[std::to_string(raw)] = idx;
    return nlohmann::json{{"time_column", time_column},
                          {"label_column", label_column},
                          {"feature_columns", feature_columns},
                          {"label_map", lm}};
  }

  static ColumnManifest from_json(const nlohmann::json& j) {
    ColumnManifest m;
    m.time_column = j.at("time_column").get<std::string>();
    m.label_column = j.at("label_column").get<std::string>();
    m.feature_columns = j.at("feature_columns").get<std::vector<std::string>>();
    m.label_map.clear();
    for (const auto& [key, value] : j.at("label_map").items()) {
      m.label_map[std::stoi(key)] = value.get<int>();
    }
    m.validate();
    return m;
  }

  static ColumnManifest load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError(cat("cannot open column manifest ", path));
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(cat("column manifest ", path, ": ", e.what()));
    }
    return from_json(j);
  }
};

/// Default layout for the consolidated UP-Fall export: three wearables
/// (ankle, right pocket, belt: accelerometer xyz, angular velocity xyz,
/// luminosity), the EEG headset value, and the six infrared sensors = 28
/// columns. Raw activity ids 1..11 map to classes 0..10 and the no-activity
/// id 20 maps to class 11. Verify the names against your copy of the dataset;
/// the prepare command accepts a manifest override.
inline ColumnManifest default_column_manifest() {
  ColumnManifest m;
  m.time_column = "Time";
  m.label_column = "Tag";
  for (const char* site : {"Ankle", "RightPocket", "Belt"}) {
    for (const char* axis : {"X", "Y", "Z"}) m.feature_columns.push_back(cat(site, "Accelerometer", axis));
    for (const char* axis : {"X", "Y", "Z"}) m.feature_columns.push_back(cat(site, "AngularVelocity", axis));
    m.feature_columns.push_back(cat(site, "Luminosity"));
  }
  m.feature_columns.push_back("BrainSensor");
  for (int i = 1; i <= 6; ++i) m.feature_columns.push_back(cat("Infrared", i));
  for (int raw = 1; raw <= 11; ++raw) m.label_map[raw] = raw - 1;
  m.label_map[20] = 11;  // no activity
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// CSV ingest

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    size_t a = s.find_first_not_of(" \t\"");
    size_t b = s.find_last_not_of(" \t\"");
    s = (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
  }
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + s.size();
}

/// Timestamps are either plain seconds or an ISO-8601 date-time
/// (2018-06-07T12:52:29.844310, 'T' or space separator), taken as UTC.
inline bool parse_timestamp(const std::string& s, double& out) {
  if (parse_double(s, out)) return true;
  int y, mo, d, h, mi;
  double sec;
  char sep;
  if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%lf", &y, &mo, &d, &sep, &h, &mi, &sec) == 7 &&
      (sep == 'T' || sep == ' ')) {
    // days-from-civil, no timezone applied
    int yy = y - (mo <= 2);
    int era = (yy >= 0 ? yy : yy - 399) / 400;
    unsigned yoe = static_cast<unsigned>(yy - era * 400);
    unsigned doy = static_cast<unsigned>((153 * (mo + (mo > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    long long days = static_cast<long long>(era) * 146097 + static_cast<long long>(doe) - 719468;
    out = static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + sec;
    return true;
  }
  return false;
}

inline bool is_missing_cell(const std::string& s) {
  if (s.empty()) return true;
  std::string lower;
  for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower == "nan" || lower == "na" || lower == "null";
}

}  // namespace detail

struct CsvLoadResult {
  std::vector<SensorRecord> records;
  long long rows_read = 0;
  long long rejected_labels = 0;  // unknown or missing activity ids
};

/// Read the consolidated sensor CSV, selecting the manifest's columns by
/// name. A leading auxiliary header line (as in some consolidated exports) is
/// skipped if the real header is on the second line. Rows whose activity id
/// is not in the label map are rejected and counted.
inline CsvLoadResult load_consolidated_csv(const std::string& path,
                                           const ColumnManifest& manifest = default_column_manifest()) {
  manifest.validate();
  std::ifstream f(path);
  if (!f) throw DataError(cat("cannot open sensor CSV ", path));

  std::string line;
  long long line_no = 0;
  auto next_line = [&]() {
    if (!std::getline(f, line)) return false;
    ++line_no;
    return true;
  };

  if (!next_line()) throw DataError(cat(path, ": empty file"));
  std::vector<std::string> header = detail::split_csv_line(line);
  auto find_col = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  if (find_col(manifest.time_column) < 0) {
    // Tolerate one auxiliary line before the real header.
    if (next_line()) header = detail::split_csv_line(line);
    if (find_col(manifest.time_column) < 0) {
      throw DataError(cat(path, ": missing column '", manifest.time_column, "' in header"));
    }
  }
  int time_idx = find_col(manifest.time_column);
  int label_idx = find_col(manifest.label_column);
  if (label_idx < 0) throw DataError(cat(path, ": missing column '", manifest.label_column, "'"));
  std::vector<int> feat_idx;
  for (const auto& name : manifest.feature_columns) {
    int idx = find_col(name);
    if (idx < 0) throw DataError(cat(path, ": missing column '", name, "'"));
    feat_idx.push_back(idx);
  }

  CsvLoadResult out;
  while (next_line()) {
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = detail::split_csv_line(line);
    ++out.rows_read;
    SensorRecord rec;
    const std::string& tcell = cells.size() > static_cast<size_t>(time_idx)
                                   ? cells[static_cast<size_t>(time_idx)]
                                   : std::string();
    if (detail::is_missing_cell(tcell)) {
      ++out.rejected_labels;  // unusable row: no timestamp
      continue;
    }
    if (!detail::parse_timestamp(tcell, rec.timestamp)) {
      throw DataError(cat(path, ":", line_no, ": cannot parse timestamp '", tcell, "'"));
    }
    for (int i = 0; i < kNumSensorFeatures; ++i) {
      const std::string& cell = cells.size() > static_cast<size_t>(feat_idx[static_cast<size_t>(i)])
                                    ? cells[static_cast<size_t>(feat_idx[static_cast<size_t>(i)])]
                                    : std::string();
      if (detail::is_missing_cell(cell)) {
        rec.features[static_cast<size_t>(i)] = std::nanf("");
        continue;
      }
      double v;
      if (!detail::parse_double(cell, v)) {
        throw DataError(cat(path, ":", line_no, ": cannot parse value '", cell, "' in column '",
                            manifest.feature_columns[static_cast<size_t>(i)], "'"));
      }
      rec.features[static_cast<size_t>(i)] = static_cast<float>(v);
    }
    const std::string& lcell = cells.size() > static_cast<size_t>(label_idx)
                                   ? cells[static_cast<size_t>(label_idx)]
                                   : std::string();
    double lv;
    if (detail::is_missing_cell(lcell) || !detail::parse_double(lcell, lv)) {
      ++out.rejected_labels;
      continue;
    }
    rec.raw_label = static_cast<int>(std::llround(lv));
    if (!manifest.label_map.count(rec.raw_label)) {
      ++out.rejected_labels;
      continue;
    }
    out.records.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cleaning

struct CleanResult {
  std::vector<SensorRecord> records;
  long long duplicates_removed = 0;
  long long missing_removed = 0;
};

/// Drop exact-duplicate rows (first occurrence kept) and rows containing any
/// NaN feature. Order is otherwise preserved; clean(clean(x)) == clean(x).
inline CleanResult clean(const std::vector<SensorRecord>& records) {
  CleanResult out;
  out.records.reserve(records.size());
  std::unordered_set<std::string> seen;
  seen.reserve(records.size() * 2);
  for (const auto& rec : records) {
    bool missing = false;
    for (float v : rec.features) {
      if (std::isnan(v)) {
        missing = true;
        break;
      }
    }
    if (missing) {
      ++out.missing_removed;
      continue;
    }
    std::string key(reinterpret_cast<const char*>(&rec.timestamp), sizeof(rec.timestamp));
    key.append(reinterpret_cast<const char*>(rec.features.data()),
               sizeof(float) * rec.features.size());
    key.append(reinterpret_cast<const char*>(&rec.raw_label), sizeof(rec.raw_label));
    if (!seen.insert(std::move(key)).second) {
      ++out.duplicates_removed;
      continue;
    }
    out.records.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frame loading

struct FrameDirResult {
  std::vector<FrameRecord> frames;  // sorted by timestamp
  long long skipped_files = 0;
};

/// Read an image directory whose filenames carry epoch-millisecond
/// timestamps (<epoch_millis>.png or .pgm). Each image runs through
/// grayscale -> resize to 32x32 -> scale to [0,1].
inline FrameDirResult load_frames_dir(const std::string& dir, int camera_id) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError(cat("image directory not found: ", dir));
  FrameDirResult out;
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    std::string stem = p.stem().string();
    bool supported = ends_with_ci(p.filename().string(), ".png") ||
                     ends_with_ci(p.filename().string(), ".pgm");
    bool numeric = !stem.empty() &&
                   std::all_of(stem.begin(), stem.end(), [](unsigned char c) {
                     return std::isdigit(c) != 0;
                   });
    if (!supported || !numeric) {
      ++out.skipped_files;
      continue;
    }
    FrameRecord fr;
    fr.camera_id = camera_id;
    fr.timestamp = static_cast<double>(std::stoll(stem)) / 1000.0;
    GrayImage g = scale_pixels(resize_32(to_grayscale(load_image(p.string()))));
    std::transform(g.values.begin(), g.values.end(), fr.pixels.begin(),
                   [](double v) { return static_cast<float>(v); });
    out.frames.push_back(std::move(fr));
  }
  std::sort(out.frames.begin(), out.frames.end(),
            [](const FrameRecord& a, const FrameRecord& b) { return a.timestamp < b.timestamp; });
  return out;
}

// ---------------------------------------------------------------------------
// Alignment

struct AlignResult {
  std::vector<AlignedSample> samples;
  long long dropped_gap = 0;  // sensor rows too far from a frame of either camera
};

namespace detail {

/// Index of the frame nearest in time; ties break toward the earlier frame.
inline size_t nearest_frame(const std::vector<FrameRecord>& frames, double t) {
  auto it = std::lower_bound(frames.begin(), frames.end(), t,
                             [](const FrameRecord& f, double v) { return f.timestamp < v; });
  if (it == frames.begin()) return 0;
  if (it == frames.end()) return frames.size() - 1;
  size_t next = static_cast<size_t>(it - frames.begin());
  size_t prev = next - 1;
  double dp = t - frames[prev].timestamp;
  double dn = frames[next].timestamp - t;
  return dp <= dn ? prev : next;
}

}  // namespace detail

/// Pair each sensor record with the nearest-in-time frame of each camera.
/// Records farther than max_gap seconds from either camera are dropped and
/// counted. Frame lists must be sorted by timestamp.
inline AlignResult align(const std::vector<SensorRecord>& sensors,
                         const std::vector<FrameRecord>& cam1,
                         const std::vector<FrameRecord>& cam2, double max_gap = 0.5,
                         const std::map<int, int>& label_map = default_column_manifest().label_map) {
  if (cam1.empty()) throw DataError("align: camera 1 stream is empty");
  if (cam2.empty()) throw DataError("align: camera 2 stream is empty");
  auto check_sorted = [](const std::vector<FrameRecord>& v, const char* name) {
    if (!std::is_sorted(v.begin(), v.end(), [](const FrameRecord& a, const FrameRecord& b) {
          return a.timestamp < b.timestamp;
        })) {
      throw DataError(cat("align: ", name, " frames are not sorted by timestamp"));
    }
  };
  check_sorted(cam1, "camera 1");
  check_sorted(cam2, "camera 2");

  AlignResult out;
  out.samples.reserve(sensors.size());
  for (const auto& s : sensors) {
    size_t i1 = detail::nearest_frame(cam1, s.timestamp);
    size_t i2 = detail::nearest_frame(cam2, s.timestamp);
    if (std::abs(cam1[i1].timestamp - s.timestamp) > max_gap ||
        std::abs(cam2[i2].timestamp - s.timestamp) > max_gap) {
      ++out.dropped_gap;
      continue;
    }
    auto it = label_map.find(s.raw_label);
    if (it == label_map.end()) {
      throw ValueError(cat("align: raw label ", s.raw_label, " not in label map"));
    }
    AlignedSample a;
    a.timestamp = s.timestamp;
    a.sensor = s.features;
    a.cam1 = cam1[i1].pixels;
    a.cam2 = cam2[i2].pixels;
    a.label = static_cast<uint8_t>(it->second);
    out.samples.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization

struct StandardizationStats {
  std::array<double, kNumSensorFeatures> mean{};
  std::array<double, kNumSensorFeatures> stddev{};  // population sigma

  static constexpr double kConstantGuard = 1e-12;
};

/// Per-feature mean/population-sigma over the given samples (the training
/// split, unless reproducing the fit-on-all reading).
inline StandardizationStats fit_standardization(const std::vector<AlignedSample>& samples) {
  if (samples.size() < 2) {
    throw ValueError(cat("fit_standardization: need at least 2 samples, got ", samples.size()));
  }
  StandardizationStats st;
  double n = static_cast<double>(samples.size());
  for (const auto& s : samples) {
    for (int i = 0; i < kNumSensorFeatures; ++i) st.mean[static_cast<size_t>(i)] += s.sensor[static_cast<size_t>(i)];
  }
  for (auto& m : st.mean) m /= n;
  for (const auto& s : samples) {
    for (int i = 0; i < kNumSensorFeatures; ++i) {
      double d = s.sensor[static_cast<size_t>(i)] - st.mean[static_cast<size_t>(i)];
      st.stddev[static_cast<size_t>(i)] += d * d;
    }
  }
  for (auto& v : st.stddev) v = std::sqrt(v / n);
  return st;
}

/// z = (x - mu) / sigma per feature; constant features map to 0.
inline void apply_standardization(const StandardizationStats& st, std::vector<AlignedSample>& samples) {
  for (auto& s : samples) {
    for (int i = 0; i < kNumSensorFeatures; ++i) {
      size_t k = static_cast<size_t>(i);
      if (st.stddev[k] < StandardizationStats::kConstantGuard) {
        s.sensor[k] = 0.0f;
      } else {
        s.sensor[k] = static_cast<float>((s.sensor[k] - st.mean[k]) / st.stddev[k]);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitRatios {
  double train = 0.6, val = 0.2, test = 0.2;
};

struct DatasetSplit {
  std::vector<AlignedSample> train, val, test;
  uint64_t seed = 0;
  SplitRatios ratios;
};

/// Stratified seeded 60/20/20 split: per class, a seeded shuffle then
/// rounded proportional counts. Every class present lands in every split.
inline DatasetSplit split_dataset(const std::vector<AlignedSample>& samples, uint64_t seed,
                                  SplitRatios ratios = {}) {
  std::map<int, std::vector<int>> by_class;
  for (size_t i = 0; i < samples.size(); ++i) {
    by_class[samples[i].label].push_back(static_cast<int>(i));
  }
  DatasetSplit out;
  out.seed = seed;
  out.ratios = ratios;
  Rng rng = make_rng(seed);
  for (auto& [cls, idx] : by_class) {
    if (idx.size() < 5) {
      throw ValueError(cat("split: class ", cls, " has only ", idx.size(),
                           " samples; need >= 5 to stratify"));
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    long long n = static_cast<long long>(idx.size());
    long long n_val = std::llround(ratios.val * static_cast<double>(n));
    long long n_test = std::llround(ratios.test * static_cast<double>(n));
    long long n_train = n - n_val - n_test;
    if (n_train < 1 || n_val < 1 || n_test < 1) {
      throw ValueError(cat("split: class ", cls, " too small for ratios"));
    }
    for (long long i = 0; i < n_train; ++i) out.train.push_back(samples[static_cast<size_t>(idx[static_cast<size_t>(i)])]);
    for (long long i = n_train; i < n_train + n_val; ++i) out.val.push_back(samples[static_cast<size_t>(idx[static_cast<size_t>(i)])]);
    for (long long i = n_train + n_val; i < n; ++i) out.test.push_back(samples[static_cast<size_t>(idx[static_cast<size_t>(i)])]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aligned dataset file (FALD1)

inline constexpr char kAlignedMagic[5] = {'F', 'A', 'L', 'D', '1'};

/// Little-endian binary: magic "FALD1", u32 sample count, then per sample
/// f32x28 sensor, f32x1024 cam1, f32x1024 cam2, u8 label, f64 timestamp.
inline void write_aligned_file(const std::string& path, const std::vector<AlignedSample>& samples) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(cat("cannot write aligned dataset ", path));
  f.write(kAlignedMagic, 5);
  binio::write_u32(f, static_cast<uint32_t>(samples.size()));
  for (const auto& s : samples) {
    binio::write_f32(f, s.sensor.data(), s.sensor.size());
    binio::write_f32(f, s.cam1.data(), s.cam1.size());
    binio::write_f32(f, s.cam2.data(), s.cam2.size());
    binio::write_u8(f, s.label);
    binio::write_f64(f, s.timestamp);
  }
  if (!f) throw DataError(cat("failed writing aligned dataset ", path));
}

inline std::vector<AlignedSample> read_aligned_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(cat("cannot open aligned dataset ", path));
  char magic[5];
  f.read(magic, 5);
  if (!f || std::memcmp(magic, kAlignedMagic, 5) != 0) {
    throw DataError(cat(path, ": not an aligned dataset file (bad magic)"));
  }
  uint32_t count = binio::read_u32(f);
  std::vector<AlignedSample> out(count);
  for (auto& s : out) {
    binio::read_f32(f, s.sensor.data(), s.sensor.size());
    binio::read_f32(f, s.cam1.data(), s.cam1.size());
    binio::read_f32(f, s.cam2.data(), s.cam2.size());
    s.label = binio::read_u8(f);
    s.timestamp = binio::read_f64(f);
    if (!f) throw DataError(cat(path, ": truncated aligned dataset"));
    if (s.label >= kNumClasses) throw DataError(cat(path, ": label ", int(s.label), " out of range"));
  }
  return out;
}

}  // namespace falldet
