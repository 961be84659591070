#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Little-endian primitives shared by the dataset format and all snapshots.

namespace cle::bytes {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }
inline double get_f64(const std::uint8_t* p) { return std::bit_cast<double>(get_u64(p)); }

// Stream flavors for snapshot writers/readers.
struct Writer {
  std::ostream& os;
  void u32(std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                         static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  void u64(std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* p, std::size_t n) { os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void magic(const char tag[4]) { os.write(tag, 4); }
};

struct Reader {
  std::istream& is;
  void raw(void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (is.gcount() != static_cast<std::streamsize>(n)) throw std::runtime_error("snapshot truncated");
  }
  std::uint32_t u32() {
    std::uint8_t b[4];
    raw(b, 4);
    return get_u32(b);
  }
  std::uint64_t u64() {
    std::uint8_t b[8];
    raw(b, 8);
    return get_u64(b);
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  void expect_magic(const char tag[4], const std::string& what) {
    char b[4];
    raw(b, 4);
    if (std::memcmp(b, tag, 4) != 0) throw std::runtime_error("bad magic for " + what + " snapshot");
  }
  void expect_version(std::uint32_t want, const std::string& what) {
    std::uint32_t got = u32();
    if (got != want)
      throw std::runtime_error(what + " snapshot version mismatch: got " + std::to_string(got) + ", want " +
                               std::to_string(want));
  }
};

}  // namespace cle::bytes
