#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace falldet {

inline constexpr const char* kVersion = "falldet 0.1.0";
inline constexpr int kNumClasses = 12;
inline constexpr int kNumSensorFeatures = 28;
inline constexpr int kImageSide = 32;
inline constexpr int kImagePixels = kImageSide * kImageSide;

/// Base type for everything this library throws.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor/layer shape incompatibilities.
class ShapeError : public Error {
public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Bad values: NaN features, out-of-range labels, invalid parameters.
class ValueError : public Error {
public:
  explicit ValueError(const std::string& msg) : Error(msg) {}
};

/// File ingest problems: missing columns, parse failures, bad magic.
class DataError : public Error {
public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

/// Invalid experiment/model configuration.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Training loss became non-finite.
class DivergenceError : public Error {
public:
  explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

/// All randomness in the library flows through seeded mt19937 engines.
using Rng = std::mt19937;

inline Rng make_rng(uint64_t seed) { return Rng(static_cast<Rng::result_type>(seed)); }

/// Derive a child seed so independent components do not share streams.
inline uint64_t derive_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace falldet
