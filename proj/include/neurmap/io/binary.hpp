#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace neurmap::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

inline void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_f32(std::ostream& os, float v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void put_bytes(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename V>
V get_raw(std::istream& is, const char* what) {
  V v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw std::runtime_error(std::string("truncated file while reading ") + what);
  }
  return v;
}
inline std::uint32_t get_u32(std::istream& is, const char* what) {
  return get_raw<std::uint32_t>(is, what);
}
inline std::uint64_t get_u64(std::istream& is, const char* what) {
  return get_raw<std::uint64_t>(is, what);
}
inline float get_f32(std::istream& is, const char* what) { return get_raw<float>(is, what); }
inline std::string get_bytes(std::istream& is, const char* what, std::uint32_t limit = 1u << 26) {
  const auto n = get_u32(is, what);
  if (n > limit) throw std::runtime_error(std::string("implausible length for ") + what);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) {
    throw std::runtime_error(std::string("truncated file while reading ") + what);
  }
  return s;
}

}  // namespace neurmap::io
