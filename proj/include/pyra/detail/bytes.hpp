#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "pyra/error.hpp"

// Little-endian primitives for the VOL1 and PNET containers. Readers take a
// context string that becomes the DataError message on truncation.
namespace pyra::detail {

inline void put_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double d) {
  put_u64(os, std::bit_cast<std::uint64_t>(d));
}

inline std::uint8_t get_u8(std::istream& is, const std::string& ctx) {
  char c;
  if (!is.get(c)) throw DataError(ctx);
  return static_cast<std::uint8_t>(c);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& ctx) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError(ctx);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& is, const std::string& ctx) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError(ctx);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is, const std::string& ctx) {
  return std::bit_cast<double>(get_u64(is, ctx));
}

inline void put_f64_array(std::ostream& os, const double* p, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(p),
             static_cast<std::streamsize>(n * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < n; ++i) put_f64(os, p[i]);
  }
}

inline void get_f64_array(std::istream& is, double* p, std::size_t n,
                          const std::string& ctx) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(p),
                 static_cast<std::streamsize>(n * sizeof(double))))
      throw DataError(ctx);
  } else {
    for (std::size_t i = 0; i < n; ++i) p[i] = get_f64(is, ctx);
  }
}

}  // namespace pyra::detail
