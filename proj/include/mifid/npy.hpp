/* Copyright 2026 The mifid-engine Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef MIFID_NPY_HPP
#define MIFID_NPY_HPP

// Reader and writer for the NPY binary array format, restricted to what the
// engine exchanges with feature extractors: 2-D, C-order, little-endian
// float32 or float64.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <regex>
#include <span>
#include <string>
#include <vector>

#include "mifid/error.hpp"

namespace mifid::npy {

enum class Dtype { float32, float64 };

/// A decoded 2-D array, widened to double, row-major.
struct Array {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  Dtype stored_as = Dtype::float64;
  std::vector<double> values;
};

namespace detail {

inline constexpr char kMagic[] = "\x93NUMPY";
inline constexpr std::size_t kMagicLen = 6;

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are read in place; big-endian hosts are not supported");

inline std::string dict_value(const std::string& header, const std::string& key) {
  // 'key': value   where value is a quoted string, a bare word, or a tuple.
  const std::regex re("'" + key + "'\\s*:\\s*('[^']*'|\\([^)]*\\)|[A-Za-z]+)");
  std::smatch m;
  if (!std::regex_search(header, m, re)) {
    throw FormatError("NPY header is missing key '" + key + "'");
  }
  return m[1].str();
}

inline std::vector<std::int64_t> parse_shape(const std::string& tuple) {
  std::vector<std::int64_t> dims;
  const std::regex num("\\d+");
  for (auto it = std::sregex_iterator(tuple.begin(), tuple.end(), num); it != std::sregex_iterator(); ++it) {
    dims.push_back(std::stoll(it->str()));
  }
  return dims;
}

}  // namespace detail

/// Decodes an in-memory NPY image. `origin` only labels error messages.
inline Array parse(std::span<const char> bytes, const std::string& origin = "<buffer>") {
  using namespace detail;
  if (bytes.size() < kMagicLen + 4 || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    throw FormatError(origin + ": not an NPY file (bad magic)");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw FormatError(origin + ": truncated NPY preamble");
    for (int i = 0; i < 4; ++i) {
      header_len |= static_cast<std::size_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
    }
    offset = 12;
  } else {
    throw FormatError(origin + ": unsupported NPY version " + std::to_string(major));
  }
  if (bytes.size() < offset + header_len) throw FormatError(origin + ": truncated NPY header");
  const std::string header(bytes.data() + offset, header_len);
  offset += header_len;

  const std::string descr = dict_value(header, "descr");
  const std::string fortran = dict_value(header, "fortran_order");
  const auto shape = parse_shape(dict_value(header, "shape"));

  Array out;
  std::size_t word = 0;
  if (descr == "'<f8'") {
    out.stored_as = Dtype::float64;
    word = 8;
  } else if (descr == "'<f4'") {
    out.stored_as = Dtype::float32;
    word = 4;
  } else {
    throw FormatError(origin + ": unsupported dtype " + descr + " (expected little-endian float32/float64)");
  }
  if (fortran != "False") throw FormatError(origin + ": Fortran-order arrays are not supported");
  if (shape.size() != 2) {
    throw FormatError(origin + ": expected a 2-D array, got " + std::to_string(shape.size()) + " dimensions");
  }
  out.rows = shape[0];
  out.cols = shape[1];

  const auto count = static_cast<std::size_t>(out.rows) * static_cast<std::size_t>(out.cols);
  if (bytes.size() - offset != count * word) {
    throw FormatError(origin + ": payload is " + std::to_string(bytes.size() - offset) + " bytes, expected " +
                      std::to_string(count * word));
  }
  out.values.resize(count);
  const char* p = bytes.data() + offset;
  if (word == 8) {
    std::memcpy(out.values.data(), p, count * 8);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, p + 4 * i, 4);
      out.values[i] = static_cast<double>(f);
    }
  }
  return out;
}

inline Array read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open file");
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(bytes, path.string());
}

/// Encodes a row-major rows x cols block as NPY v1.0.
inline std::vector<char> encode(std::span<const double> values, std::int64_t rows, std::int64_t cols,
                                Dtype dtype = Dtype::float64) {
  if (static_cast<std::size_t>(rows * cols) != values.size()) {
    throw ConfigError("npy::encode: value count does not match shape");
  }
  std::string header = "{'descr': '";
  header += dtype == Dtype::float64 ? "<f8" : "<f4";
  header += "', 'fortran_order': False, 'shape': (" + std::to_string(rows) + ", " + std::to_string(cols) + "), }";
  // Preamble (10 bytes) + header + '\n' padded to a multiple of 64.
  const std::size_t unpadded = detail::kMagicLen + 4 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::string preamble(detail::kMagic, detail::kMagicLen);
  preamble += '\x01';
  preamble += '\x00';
  preamble += static_cast<char>(header.size() & 0xff);
  preamble += static_cast<char>((header.size() >> 8) & 0xff);
  preamble += header;

  const std::size_t word = dtype == Dtype::float64 ? 8 : 4;
  const std::size_t start = preamble.size();
  std::vector<char> out(start + values.size() * word);
  std::memcpy(out.data(), preamble.data(), start);
  if (dtype == Dtype::float64) {
    std::memcpy(out.data() + start, values.data(), values.size() * 8);
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto f = static_cast<float>(values[i]);
      std::memcpy(out.data() + start + 4 * i, &f, 4);
    }
  }
  return out;
}

inline void write(const std::filesystem::path& path, std::span<const double> values, std::int64_t rows,
                  std::int64_t cols, Dtype dtype = Dtype::float64) {
  const auto bytes = encode(values, rows, cols, dtype);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(path.string() + ": write failed");
}

}  // namespace mifid::npy

#endif  // MIFID_NPY_HPP
