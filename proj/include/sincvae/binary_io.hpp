#pragma once

#include "sincvae/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace sincvae::binio {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

template <typename T>
void write_le(std::ostream& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  char buf[sizeof(T)];
  in.read(buf, sizeof(T));
  require(in.gcount() == static_cast<std::streamsize>(sizeof(T)), ErrorCode::kFormat,
          std::string("truncated container while reading ") + what);
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

inline void write_doubles(std::ostream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(double)));
}

inline void read_doubles(std::istream& in, double* data, std::size_t count, const char* what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  require(in.gcount() == static_cast<std::streamsize>(count * sizeof(double)),
          ErrorCode::kFormat, std::string("truncated container while reading ") + what);
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char buf[4] = {};
  in.read(buf, 4);
  require(in.gcount() == 4 && std::memcmp(buf, magic, 4) == 0, ErrorCode::kFormat,
          std::string("not a ") + magic + " container (bad magic bytes)");
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_le<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const char* what, std::uint64_t max_len) {
  const auto len = read_le<std::uint64_t>(in, what);
  require(len <= max_len, ErrorCode::kFormat, std::string("implausible length for ") + what);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  require(in.gcount() == static_cast<std::streamsize>(len), ErrorCode::kFormat,
          std::string("truncated container while reading ") + what);
  return s;
}

}  // namespace sincvae::binio
