#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "falldet/common.hpp"

namespace falldet {

/// 8-bit image as loaded from disk; channels is 1 (gray) or 3 (RGB).
struct ImageU8 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;  // row-major, interleaved channels

  uint8_t at(int r, int c, int ch) const {
    return pixels[(static_cast<size_t>(r) * width + c) * channels + ch];
  }
};

/// Grayscale image; double-precision values so the conversion equation and
/// interpolation stay exact to well below any downstream tolerance. Range
/// depends on pipeline stage: [0,255] after conversion, [0,1] after scaling.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int r, int c) const { return values[static_cast<size_t>(r) * width + c]; }
  double& at(int r, int c) { return values[static_cast<size_t>(r) * width + c]; }
};

/// Luma conversion: gray = 0.299 R + 0.587 G + 0.114 B. Grayscale input
/// passes through unchanged.
inline GrayImage to_grayscale(const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw ValueError(cat("to_grayscale: expected 1 or 3 channels, got ", img.channels));
  }
  GrayImage out;
  out.height = img.height;
  out.width = img.width;
  out.values.resize(static_cast<size_t>(img.height) * img.width);
  size_t n = out.values.size();
  if (img.channels == 1) {
    for (size_t i = 0; i < n; ++i) out.values[i] = static_cast<double>(img.pixels[i]);
  } else {
    for (size_t i = 0; i < n; ++i) {
      const uint8_t* p = &img.pixels[i * 3];
      out.values[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
  }
  return out;
}

/// Bilinear resize with the half-pixel coordinate convention, so a same-size
/// resize is the identity and constant images stay constant.
inline GrayImage resize_bilinear(const GrayImage& img, int out_h, int out_w) {
  if (img.height < 1 || img.width < 1 || img.values.empty()) {
    throw ValueError("resize: empty image");
  }
  if (img.height == out_h && img.width == out_w) return img;
  GrayImage out;
  out.height = out_h;
  out.width = out_w;
  out.values.resize(static_cast<size_t>(out_h) * out_w);
  double sr = static_cast<double>(img.height) / out_h;
  double sc = static_cast<double>(img.width) / out_w;
  for (int r = 0; r < out_h; ++r) {
    double fr = (r + 0.5) * sr - 0.5;
    fr = std::clamp(fr, 0.0, static_cast<double>(img.height - 1));
    int r0 = static_cast<int>(fr);
    int r1 = std::min(r0 + 1, img.height - 1);
    double wr = fr - r0;
    for (int c = 0; c < out_w; ++c) {
      double fc = (c + 0.5) * sc - 0.5;
      fc = std::clamp(fc, 0.0, static_cast<double>(img.width - 1));
      int c0 = static_cast<int>(fc);
      int c1 = std::min(c0 + 1, img.width - 1);
      double wc = fc - c0;
      double top = img.at(r0, c0) * (1 - wc) + img.at(r0, c1) * wc;
      double bot = img.at(r1, c0) * (1 - wc) + img.at(r1, c1) * wc;
      out.at(r, c) = top * (1 - wr) + bot * wr;
    }
  }
  return out;
}

inline GrayImage resize_32(const GrayImage& img) { return resize_bilinear(img, kImageSide, kImageSide); }

/// Map [0,255] pixel values to [0,1] by dividing by 255.
inline GrayImage scale_pixels(const GrayImage& img) {
  GrayImage out = img;
  for (auto& v : out.values) {
    if (!(v >= 0.0 && v <= 255.0)) {
      throw ValueError(cat("scale_pixels: value ", v, " outside [0,255]"));
    }
    v /= 255.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// PGM (P5 binary / P2 ascii), 8-bit.

inline ImageU8 load_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(cat("cannot open image ", path));
  std::string magic;
  f >> magic;
  if (magic != "P5" && magic != "P2") throw DataError(cat(path, ": not a PGM file"));
  auto next_int = [&]() {
    int v;
    // skip whitespace and '#' comments
    while (true) {
      int ch = f.peek();
      if (ch == '#') {
        std::string line;
        std::getline(f, line);
      } else if (ch != EOF && std::isspace(static_cast<unsigned char>(ch))) {
        f.get();
      } else {
        break;
      }
    }
    if (!(f >> v)) throw DataError(cat(path, ": truncated PGM header"));
    return v;
  };
  int w = next_int(), h = next_int(), maxval = next_int();
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) {
    throw DataError(cat(path, ": unsupported PGM geometry"));
  }
  ImageU8 img;
  img.width = w;
  img.height = h;
  img.channels = 1;
  img.pixels.resize(static_cast<size_t>(w) * h);
  if (magic == "P5") {
    f.get();  // single whitespace after maxval
    f.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!f) throw DataError(cat(path, ": truncated PGM data"));
  } else {
    for (auto& p : img.pixels) {
      int v;
      if (!(f >> v)) throw DataError(cat(path, ": truncated PGM data"));
      p = static_cast<uint8_t>(std::clamp(v, 0, 255));
    }
  }
  return img;
}

inline void save_pgm(const std::string& path, const ImageU8& img) {
  if (img.channels != 1) throw ValueError("save_pgm: grayscale images only");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(cat("cannot write image ", path));
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
}

// ---------------------------------------------------------------------------
// PNG: 8-bit non-interlaced grayscale / RGB / (A channels dropped).

namespace detail {

inline uint32_t read_u32_be(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

inline int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace detail

inline ImageU8 load_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(cat("cannot open image ", path));
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0) {
    throw DataError(cat(path, ": not a PNG file"));
  }
  size_t pos = 8;
  int w = 0, h = 0, bit_depth = 0, color_type = 0;
  std::vector<uint8_t> idat;
  bool seen_iend = false;
  while (pos + 8 <= bytes.size() && !seen_iend) {
    uint32_t len = detail::read_u32_be(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw DataError(cat(path, ": truncated PNG chunk"));
    std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
    const uint8_t* data = &bytes[pos + 8];
    if (type == "IHDR") {
      w = static_cast<int>(detail::read_u32_be(data));
      h = static_cast<int>(detail::read_u32_be(data + 4));
      bit_depth = data[8];
      color_type = data[9];
      if (data[12] != 0) throw DataError(cat(path, ": interlaced PNG not supported"));
      if (bit_depth != 8) throw DataError(cat(path, ": only 8-bit PNG supported"));
      if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6) {
        throw DataError(cat(path, ": unsupported PNG color type ", color_type));
      }
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (type == "IEND") {
      seen_iend = true;
    }
    pos += 12 + len;
  }
  if (w < 1 || h < 1) throw DataError(cat(path, ": bad PNG header"));

  int src_ch = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
  size_t stride = static_cast<size_t>(w) * src_ch;
  std::vector<uint8_t> raw((stride + 1) * static_cast<size_t>(h));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  int rc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
  if (rc != Z_OK || raw_len != raw.size()) throw DataError(cat(path, ": PNG inflate failed"));

  // Undo per-row filters in place.
  std::vector<uint8_t> prev(stride, 0);
  std::vector<uint8_t> out(static_cast<size_t>(h) * stride);
  for (int r = 0; r < h; ++r) {
    const uint8_t* row = &raw[static_cast<size_t>(r) * (stride + 1)];
    uint8_t filter = row[0];
    uint8_t* dst = &out[static_cast<size_t>(r) * stride];
    for (size_t i = 0; i < stride; ++i) {
      int x = row[1 + i];
      int a = i >= static_cast<size_t>(src_ch) ? dst[i - src_ch] : 0;
      int b = prev[i];
      int c = i >= static_cast<size_t>(src_ch) ? prev[i - src_ch] : 0;
      switch (filter) {
        case 0: break;
        case 1: x += a; break;
        case 2: x += b; break;
        case 3: x += (a + b) / 2; break;
        case 4: x += detail::paeth(a, b, c); break;
        default: throw DataError(cat(path, ": bad PNG filter ", static_cast<int>(filter)));
      }
      dst[i] = static_cast<uint8_t>(x & 0xff);
    }
    std::memcpy(prev.data(), dst, stride);
  }

  ImageU8 img;
  img.width = w;
  img.height = h;
  img.channels = (src_ch == 1 || src_ch == 2) ? 1 : 3;
  img.pixels.resize(static_cast<size_t>(w) * h * img.channels);
  for (size_t px = 0; px < static_cast<size_t>(w) * h; ++px) {
    const uint8_t* s = &out[px * src_ch];
    uint8_t* d = &img.pixels[px * img.channels];
    for (int ch = 0; ch < img.channels; ++ch) d[ch] = s[ch];  // alpha dropped
  }
  return img;
}

inline bool ends_with_ci(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  for (size_t i = 0; i < suffix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[s.size() - suffix.size() + i])) !=
        std::tolower(static_cast<unsigned char>(suffix[i]))) {
      return false;
    }
  }
  return true;
}

inline ImageU8 load_image(const std::string& path) {
  if (ends_with_ci(path, ".png")) return load_png(path);
  if (ends_with_ci(path, ".pgm")) return load_pgm(path);
  throw DataError(cat("unsupported image format: ", path, " (expected .png or .pgm)"));
}

}  // namespace falldet
