#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lsec/error.hpp"

namespace lsec::binio {

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::uint64_t bits = 0;
  if constexpr (sizeof(T) == 8) {
    std::memcpy(&bits, &value, 8);
  } else {
    std::make_unsigned_t<std::conditional_t<std::is_floating_point_v<T>, std::int32_t, T>> u;
    std::memcpy(&u, &value, sizeof(T));
    bits = u;
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw IoError("unexpected end of binary file");
  }
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= std::uint64_t{bytes[i]} << (8 * i);
  T value;
  if constexpr (sizeof(T) == 8) {
    std::memcpy(&value, &bits, 8);
  } else {
    std::make_unsigned_t<std::conditional_t<std::is_floating_point_v<T>, std::int32_t, T>> u =
        static_cast<decltype(u)>(bits);
    std::memcpy(&value, &u, sizeof(T));
  }
  return value;
}

template <typename T>
void write_array(std::ostream& out, std::span<const T> values) {
  for (const T& v : values) write_le<T>(out, v);
}

template <typename T>
std::vector<T> read_array(std::istream& in, std::size_t n) {
  std::vector<T> values(n);
  for (auto& v : values) v = read_le<T>(in);
  return values;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_le<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  const auto n = read_le<std::uint64_t>(in);
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw IoError("unexpected end of binary file");
  }
  return s;
}

}  // namespace lsec::binio
