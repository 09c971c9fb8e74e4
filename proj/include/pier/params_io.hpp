// Copyright 2026 The pier Authors
// SPDX-License-Identifier: Apache-2.0
//
// params.bin layout, all integers little-endian:
//
//   offset  size  field
//        0     8  magic "PIERPARM"
//        8     4  format version (1)
//       12     8  element count
//       20     4  element width in bytes (4 = float32, 8 = float64)
//       24   n*w  IEEE-754 values, little-endian

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "pier/error.hpp"
#include "pier/model.hpp"

namespace pier {

inline constexpr std::array<char, 8> kParamsMagic = {'P', 'I', 'E', 'R', 'P', 'A', 'R', 'M'};
inline constexpr std::uint32_t kParamsVersion = 1;

namespace detail {

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class U>
U get_le(const std::string& in, std::size_t at) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

template <class T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

}  // namespace detail

template <class T>
std::string encode_params(std::span<const T> params) {
  std::string out(kParamsMagic.begin(), kParamsMagic.end());
  detail::put_le<std::uint32_t>(out, kParamsVersion);
  detail::put_le<std::uint64_t>(out, params.size());
  detail::put_le<std::uint32_t>(out, sizeof(T));
  out.reserve(out.size() + params.size() * sizeof(T));
  for (T v : params) detail::put_le(out, std::bit_cast<detail::Bits<T>>(v));
  return out;
}

template <class T>
ParamVector<T> decode_params(const std::string& bytes) {
  constexpr std::size_t header = 24;
  if (bytes.size() < header || !std::equal(kParamsMagic.begin(), kParamsMagic.end(), bytes.begin())) {
    throw ConfigError("params file: bad magic");
  }
  if (detail::get_le<std::uint32_t>(bytes, 8) != kParamsVersion) {
    throw ConfigError("params file: unsupported version");
  }
  const auto n = detail::get_le<std::uint64_t>(bytes, 12);
  if (detail::get_le<std::uint32_t>(bytes, 20) != sizeof(T)) {
    throw ConfigError("params file: element width does not match requested precision");
  }
  if (bytes.size() != header + n * sizeof(T)) throw ConfigError("params file: truncated or oversized");
  ParamVector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::bit_cast<T>(detail::get_le<detail::Bits<T>>(bytes, header + i * sizeof(T)));
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ConfigError("write to '" + path + "' failed");
}

template <class T>
void save_params(const std::string& path, std::span<const T> params) {
  write_file(path, encode_params<T>(params));
}

template <class T>
ParamVector<T> load_params(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_params<T>(bytes);
}

}  // namespace pier
