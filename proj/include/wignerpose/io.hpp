#pragma once

// Little-endian binary helpers shared by the grid, checkpoint and dataset formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "wignerpose/errors.hpp"

namespace wignerpose::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
void write(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("unexpected end of file");
  return v;
}

inline void write_doubles(std::ostream& os, const double* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_doubles(std::istream& is, double* p, std::size_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw FormatError("unexpected end of file");
}

inline void write_string(std::ostream& os, const std::string& s) {
  write<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read<std::uint64_t>(is);
  if (n > (std::uint64_t{1} << 30)) throw FormatError("string length out of range");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw FormatError("unexpected end of file");
  return s;
}

inline void write_header(std::ostream& os, const char (&magic)[5], std::uint32_t version) {
  os.write(magic, 4);
  write(os, version);
}

inline void expect_header(std::istream& is, const char (&magic)[5], std::uint32_t version) {
  std::array<char, 4> got{};
  is.read(got.data(), 4);
  if (!is || std::memcmp(got.data(), magic, 4) != 0) throw FormatError(std::string("bad magic, expected ") + magic);
  const auto v = read<std::uint32_t>(is);
  if (v != version) {
    throw FormatError(std::string(magic) + ": layout version " + std::to_string(v) + ", expected " +
                      std::to_string(version));
  }
}

}  // namespace wignerpose::io
