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
#ifndef MIFID_ERROR_HPP
#define MIFID_ERROR_HPP

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mifid {

/// Root of every exception thrown by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (bad magic, unsupported dtype, truncated payload).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Data that parses but violates a type invariant. Carries the offending
/// row indices when the violation is row-local.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, std::vector<std::int64_t> rows = {})
      : Error(with_rows(what, rows)), rows_(std::move(rows)) {}

  const std::vector<std::int64_t>& rows() const noexcept { return rows_; }

 private:
  static std::string with_rows(const std::string& what, const std::vector<std::int64_t>& rows) {
    if (rows.empty()) return what;
    std::ostringstream os;
    os << what << " (rows:";
    constexpr std::size_t kMaxListed = 20;
    for (std::size_t i = 0; i < rows.size() && i < kMaxListed; ++i) os << ' ' << rows[i];
    if (rows.size() > kMaxListed) os << " ... " << rows.size() - kMaxListed << " more";
    os << ')';
    return os.str();
  }

  std::vector<std::int64_t> rows_;
};

class InsufficientSamplesError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Inconsistent inputs: mismatched projection spaces, dimensions, or sets.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine could not produce an acceptable answer.
class NumericError : public Error {
 public:
  using Error::Error;
};

class UndefinedCorrelationError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A calibration class (memorized or legitimate) has no labeled points.
class EmptyClassError : public Error {
 public:
  using Error::Error;
};

}  // namespace mifid

#endif  // MIFID_ERROR_HPP
