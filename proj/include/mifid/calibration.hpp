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
#ifndef MIFID_CALIBRATION_HPP
#define MIFID_CALIBRATION_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mifid/error.hpp"
#include "mifid/text.hpp"

namespace mifid {

enum class Label { legitimate, memorized, unlabeled };

/// How a memorizing submission did it: memorization GAN, supervised mapping,
/// autoencoder reconstruction, or augmentation of training images.
enum class LabelDetail { mgan, sup, ae, aug };

inline std::string_view to_string(Label label) {
  switch (label) {
    case Label::legitimate: return "legitimate";
    case Label::memorized: return "memorized";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

inline std::string_view to_string(LabelDetail detail) {
  switch (detail) {
    case LabelDetail::mgan: return "mgan";
    case LabelDetail::sup: return "sup";
    case LabelDetail::ae: return "ae";
    case LabelDetail::aug: return "aug";
  }
  return "";
}

inline Label parse_label(std::string_view text) {
  if (text == "legitimate") return Label::legitimate;
  if (text == "memorized") return Label::memorized;
  if (text == "unlabeled" || text.empty()) return Label::unlabeled;
  throw ValidationError("unknown label '" + std::string(text) + "'");
}

inline std::optional<LabelDetail> parse_label_detail(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text == "mgan") return LabelDetail::mgan;
  if (text == "sup") return LabelDetail::sup;
  if (text == "ae") return LabelDetail::ae;
  if (text == "aug") return LabelDetail::aug;
  throw ValidationError("unknown label detail '" + std::string(text) + "'");
}

struct LabeledDistance {
  std::string submission_id;
  double s = 0.0;
  Label label = Label::unlabeled;
  std::optional<LabelDetail> label_detail;
};

enum class CalibrationMethod { literal, separator };

inline std::string_view to_string(CalibrationMethod method) {
  return method == CalibrationMethod::literal ? "literal" : "separator";
}

struct CalibrationResult {
  double tau_star = 0.0;
  double margin = 0.0;
  std::string space_id;
  CalibrationMethod method = CalibrationMethod::separator;
  /// Labeled points on the wrong side of tau_star.
  std::size_t misclassified = 0;
};

struct LiteralMargin {
  double d = 0.0;
  double tau = 0.0;
};

/// The least-squares form: the minimizing tau is the mean of the distances
/// and d is the residual sum of squares around it.
inline LiteralMargin memorization_margin_literal(std::span<const double> distances) {
  if (distances.size() < 2) throw ValidationError("memorization_margin_literal needs at least 2 distances");
  double sum = 0.0;
  for (const double s : distances) sum += s;
  LiteralMargin out;
  out.tau = sum / static_cast<double>(distances.size());
  for (const double s : distances) out.d += (s - out.tau) * (s - out.tau);
  return out;
}

inline CalibrationResult fit_threshold_literal(std::span<const LabeledDistance> points, std::string space_id = {}) {
  std::vector<double> s;
  s.reserve(points.size());
  for (const auto& p : points) s.push_back(p.s);
  const auto lit = memorization_margin_literal(s);
  return {lit.tau, lit.d, std::move(space_id), CalibrationMethod::literal, 0};
}

/// Labeled points the threshold gets wrong: memorized with s >= tau (not
/// penalized) plus legitimate with s < tau (penalized).
inline std::size_t misclassifications(std::span<const LabeledDistance> points, double tau) {
  std::size_t errors = 0;
  for (const auto& p : points) {
    if (p.label == Label::memorized && !(p.s < tau)) ++errors;
    if (p.label == Label::legitimate && p.s < tau) ++errors;
  }
  return errors;
}

/// Threshold separating memorized from legitimate submissions.
///
/// Separable classes get the midpoint of the gap and a margin equal to the
/// gap width. Otherwise the margin is 0 and tau is the candidate (an observed
/// distance, or the midpoint above the largest one) with the fewest labeled
/// errors, preferring the larger tau on ties. Unlabeled points are ignored.
inline CalibrationResult fit_threshold_separator(std::span<const LabeledDistance> points, std::string space_id = {}) {
  double max_memorized = -std::numeric_limits<double>::infinity();
  double min_legitimate = std::numeric_limits<double>::infinity();
  std::size_t n_memorized = 0;
  std::size_t n_legitimate = 0;
  std::set<double> observed;
  for (const auto& p : points) {
    if (p.label == Label::unlabeled) continue;
    if (!(p.s >= 0.0 && p.s <= 1.0)) {
      throw ValidationError("memorization distance for '" + p.submission_id + "' is outside [0, 1]");
    }
    observed.insert(p.s);
    if (p.label == Label::memorized) {
      ++n_memorized;
      max_memorized = std::max(max_memorized, p.s);
    } else {
      ++n_legitimate;
      min_legitimate = std::min(min_legitimate, p.s);
    }
  }
  if (n_memorized == 0) throw EmptyClassError("calibration needs at least one memorized submission");
  if (n_legitimate == 0) throw EmptyClassError("calibration needs at least one legitimate submission");

  CalibrationResult result;
  result.space_id = std::move(space_id);
  result.method = CalibrationMethod::separator;
  if (max_memorized < min_legitimate) {
    result.tau_star = 0.5 * (max_memorized + min_legitimate);
    result.margin = min_legitimate - max_memorized;
    result.misclassified = 0;
    return result;
  }

  std::vector<double> candidates(observed.begin(), observed.end());
  if (candidates.back() < 1.0) candidates.push_back(0.5 * (candidates.back() + 1.0));
  std::erase_if(candidates, [](double t) { return !(t > 0.0 && t < 1.0); });
  if (candidates.empty()) candidates.push_back(std::nextafter(1.0, 0.0));

  std::size_t best_errors = std::numeric_limits<std::size_t>::max();
  double best_tau = candidates.front();
  for (const double tau : candidates) {  // ascending, so <= keeps the larger tau
    const std::size_t errors = misclassifications(points, tau);
    if (errors <= best_errors) {
      best_errors = errors;
      best_tau = tau;
    }
  }
  result.tau_star = best_tau;
  result.margin = 0.0;
  result.misclassified = best_errors;
  return result;
}

struct SpaceSelection {
  std::string space_id;
  std::map<std::string, CalibrationResult> per_space;
};

/// Fits a separator per space and picks the one with the widest margin;
/// equal margins go to the lexicographically first space id.
inline SpaceSelection calibrate_spaces(const std::map<std::string, std::vector<LabeledDistance>>& per_space) {
  if (per_space.empty()) throw ConfigError("select_projection_space: no projection spaces given");
  std::optional<std::set<std::string>> reference_ids;
  SpaceSelection out;
  double best_margin = -1.0;
  for (const auto& [space_id, points] : per_space) {
    std::set<std::string> ids;
    for (const auto& p : points) ids.insert(p.submission_id);
    if (!reference_ids) {
      reference_ids = std::move(ids);
    } else if (ids != *reference_ids) {
      throw ConfigError("select_projection_space: space '" + space_id + "' covers a different submission set");
    }
    auto fitted = fit_threshold_separator(points, space_id);
    if (fitted.margin > best_margin) {
      best_margin = fitted.margin;
      out.space_id = space_id;
    }
    out.per_space.emplace(space_id, std::move(fitted));
  }
  return out;
}

inline std::string select_projection_space(const std::map<std::string, std::vector<LabeledDistance>>& per_space) {
  return calibrate_spaces(per_space).space_id;
}

struct LabelEntry {
  Label label = Label::unlabeled;
  std::optional<LabelDetail> label_detail;
};

/// Reads `submission_id,label,label_detail` rows (header optional).
inline std::map<std::string, LabelEntry> read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open labels file");
  std::map<std::string, LabelEntry> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = text::split_csv_line(line);
    if (fields.empty() || (fields.size() == 1 && fields[0].empty())) continue;
    if (line_no == 1 && fields[0] == "submission_id") continue;
    if (fields.size() < 2) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected at least 2 fields");
    LabelEntry entry;
    entry.label = parse_label(fields[1]);
    entry.label_detail = parse_label_detail(fields.size() > 2 ? fields[2] : std::string());
    if (entry.label_detail && entry.label != Label::memorized) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": label_detail is only allowed for memorized submissions");
    }
    if (!labels.emplace(fields[0], entry).second) {
      throw ValidationError(path.string() + ": duplicate submission_id '" + fields[0] + "'");
    }
  }
  return labels;
}

inline void write_labels_csv(const std::filesystem::path& path, const std::map<std::string, LabelEntry>& labels) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << "submission_id,label,label_detail\n";
  for (const auto& [id, entry] : labels) {
    out << id << ',' << to_string(entry.label) << ',';
    if (entry.label_detail) out << to_string(*entry.label_detail);
    out << '\n';
  }
}

}  // namespace mifid

#endif  // MIFID_CALIBRATION_HPP
