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
#ifndef MIFID_TEXT_HPP
#define MIFID_TEXT_HPP

// Small text utilities: CSV rows, the key = value config format, and a
// stable fingerprint for config digests.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mifid/error.hpp"

namespace mifid::text {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

/// Comma-separated fields, trimmed. No quoting: identifiers in this engine
/// never contain commas.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline double parse_double(std::string_view s, std::string_view what = "value") {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("cannot parse " + std::string(what) + " '" + t + "' as a number");
  }
  return v;
}

inline std::int64_t parse_int(std::string_view s, std::string_view what = "value") {
  const std::string t = trim(s);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("cannot parse " + std::string(what) + " '" + t + "' as an integer");
  }
  return v;
}

inline std::vector<double> parse_double_list(std::string_view s, std::string_view what = "list") {
  std::vector<double> out;
  std::string t = trim(s);
  if (t.size() >= 2 && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
  if (trim(t).empty()) return out;
  for (const auto& field : split_csv_line(t)) out.push_back(parse_double(field, what));
  return out;
}

/// Shortest round-trip representation of a double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fingerprint(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Flat `key = value` configuration with optional `[section]` headers, which
/// prefix the keys that follow (`[public]` + `tau = 0.1` -> `public.tau`).
/// `#` starts a comment; values may be double-quoted.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view content, std::string_view origin = "<config>") {
    KeyValueConfig cfg;
    std::string section;
    std::istringstream in{std::string(content)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string line = strip_comment(raw);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(location(origin, line_no) + "unterminated section header");
        section = trim(std::string_view(line).substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(location(origin, line_no) + "expected 'key = value'");
      std::string key = trim(std::string_view(line).substr(0, eq));
      std::string value = trim(std::string_view(line).substr(eq + 1));
      if (key.empty()) throw ConfigError(location(origin, line_no) + "empty key");
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      cfg.set(section.empty() ? key : section + "." + key, value);
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  /// Applies a `key=value` override from the command line.
  void apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.contains(key); }

  std::optional<std::string> find(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get(const std::string& key) const {
    auto v = find(key);
    if (!v) throw ConfigError("missing config key '" + key + "'");
    return *v;
  }
  std::string get(const std::string& key, std::string fallback) const { return find(key).value_or(std::move(fallback)); }

  double get_double(const std::string& key) const { return parse_double(get(key), key); }
  double get_double(const std::string& key, double fallback) const {
    const auto v = find(key);
    return v ? parse_double(*v, key) : fallback;
  }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    const auto v = find(key);
    return v ? parse_int(*v, key) : fallback;
  }
  bool get_bool(const std::string& key, bool fallback) const {
    const auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: '" + *v + "'");
  }

  /// Sorted `key = "value"` lines; stable input for digests.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = \"" + v + "\"\n";
    return out;
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  static std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
  }

  static std::string location(std::string_view origin, std::size_t line) {
    return std::string(origin) + ":" + std::to_string(line) + ": ";
  }

  std::map<std::string, std::string> values_;
};

}  // namespace mifid::text

#endif  // MIFID_TEXT_HPP
