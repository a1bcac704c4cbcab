#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace falldet::binio {

// All on-disk binary formats are little-endian.

inline void write_bytes_le(std::ostream& os, const void* p, size_t elem_size, size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(elem_size * count));
  } else {
    const auto* src = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < count; ++i) {
      for (size_t b = 0; b < elem_size; ++b) {
        os.put(static_cast<char>(src[i * elem_size + (elem_size - 1 - b)]));
      }
    }
  }
}

inline void read_bytes_le(std::istream& is, void* p, size_t elem_size, size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(elem_size * count));
  } else {
    auto* dst = static_cast<unsigned char*>(p);
    for (size_t i = 0; i < count; ++i) {
      for (size_t b = 0; b < elem_size; ++b) {
        int ch = is.get();
        dst[i * elem_size + (elem_size - 1 - b)] = static_cast<unsigned char>(ch);
      }
    }
  }
}

inline void write_u32(std::ostream& os, uint32_t v) { write_bytes_le(os, &v, 4, 1); }
inline void write_u8(std::ostream& os, uint8_t v) { os.put(static_cast<char>(v)); }
inline void write_f32(std::ostream& os, const float* v, size_t n) { write_bytes_le(os, v, 4, n); }
inline void write_f64(std::ostream& os, double v) { write_bytes_le(os, &v, 8, 1); }

inline uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  read_bytes_le(is, &v, 4, 1);
  return v;
}
inline uint8_t read_u8(std::istream& is) { return static_cast<uint8_t>(is.get()); }
inline void read_f32(std::istream& is, float* v, size_t n) { read_bytes_le(is, v, 4, n); }
inline double read_f64(std::istream& is) {
  double v = 0;
  read_bytes_le(is, &v, 8, 1);
  return v;
}

}  // namespace falldet::binio
