#pragma once

// Little-endian scalar encoding independent of host byte order.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "spoofguard/error.hpp"

namespace spoofguard::binio {

template <class U>
inline void put_le(std::ostream& os, U v) {
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, sizeof(U));
}

template <class U>
inline U get_le(std::istream& is, const std::string& what) {
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) throw ParseError("truncated input while reading " + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

inline void put_u16(std::ostream& os, std::uint16_t v) { put_le(os, v); }
inline void put_u32(std::ostream& os, std::uint32_t v) { put_le(os, v); }
inline void put_f32(std::ostream& os, float v) { put_le(os, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint16_t get_u16(std::istream& is, const std::string& what) { return get_le<std::uint16_t>(is, what); }
inline std::uint32_t get_u32(std::istream& is, const std::string& what) { return get_le<std::uint32_t>(is, what); }
inline float get_f32(std::istream& is, const std::string& what) {
  return std::bit_cast<float>(get_le<std::uint32_t>(is, what));
}
inline double get_f64(std::istream& is, const std::string& what) {
  return std::bit_cast<double>(get_le<std::uint64_t>(is, what));
}

}  // namespace spoofguard::binio
