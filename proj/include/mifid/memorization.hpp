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
#ifndef MIFID_MEMORIZATION_HPP
#define MIFID_MEMORIZATION_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mifid/error.hpp"
#include "mifid/feature_store.hpp"
#include "mifid/metrics.hpp"
#include "mifid/parallel.hpp"

namespace mifid {

inline constexpr double kDefaultEpsilon = 1e-6;

/// Threshold and stabilizer of the memorization penalty for one projection
/// space.
struct PenaltyConfig {
  double tau = 0.1;
  double epsilon = kDefaultEpsilon;
  std::string space_id;

  void validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("penalty tau must lie in (0, 1), got " + std::to_string(tau));
    if (!(epsilon > 0.0 && epsilon <= 1e-3)) {
      throw ConfigError("penalty epsilon must lie in (0, 1e-3], got " + std::to_string(epsilon));
    }
  }
};

struct MemorizationReport {
  double distance = 1.0;
  double penalty = 1.0;
  bool penalized = false;
  double tau = 0.0;
  double epsilon = kDefaultEpsilon;
  std::string space_id;
  std::vector<Eigen::Index> nearest_indices;
};

struct NearestNeighborResult {
  double distance = 0.0;
  std::vector<Eigen::Index> nearest;
};

struct SearchOptions {
  Eigen::Index block_rows = 256;
  unsigned workers = 1;
};

namespace detail {

// Candidates whose blocked |cos| is within this slack of the row maximum are
// re-evaluated exactly; the slack dominates the GEMM rounding error.
inline constexpr double kCandidateSlack = 1e-9;

inline double exact_abs_cosine(const double* x, const double* y, Eigen::Index dim, double sq_x, double sq_y) {
  double dot = 0.0;
  for (Eigen::Index k = 0; k < dim; ++k) dot += x[k] * y[k];
  return std::min(1.0, std::abs(dot) / std::sqrt(sq_x * sq_y));
}

inline RowMatrix normalized_rows(const RowMatrix& data, const Eigen::VectorXd& squared_norms) {
  return squared_norms.cwiseSqrt().cwiseInverse().asDiagonal() * data;
}

}  // namespace detail

/// Mean over generated rows of min over training rows of (1 - |cos|), and
/// the argmin training row for each generated row (lowest index on ties).
///
/// Cosines are computed as a normalized-rows matrix product over blocks of
/// `block_rows` generated rows against the whole training set; each row's
/// best candidates are then re-evaluated with the exact pairwise formula, so
/// the result does not depend on block size or worker count.
inline NearestNeighborResult memorization_distance(const FeatureMatrix& generated, const FeatureMatrix& train,
                                                   const SearchOptions& options = {}) {
  if (generated.space_id() != train.space_id()) {
    throw ConfigError("memorization_distance: projection spaces differ ('" + generated.space_id() + "' vs '" +
                      train.space_id() + "')");
  }
  if (generated.dim() != train.dim()) {
    throw ConfigError("memorization_distance: dimension mismatch (" + std::to_string(generated.dim()) + " vs " +
                      std::to_string(train.dim()) + ")");
  }
  if (options.block_rows < 1) throw ConfigError("memorization_distance: block_rows must be positive");

  const Eigen::Index n = generated.rows();
  const Eigen::Index dim = generated.dim();
  const RowMatrix train_unit = detail::normalized_rows(train.data(), train.squared_norms());
  const RowMatrix gen_unit = detail::normalized_rows(generated.data(), generated.squared_norms());

  std::vector<double> best_cos(static_cast<std::size_t>(n), 0.0);
  NearestNeighborResult result;
  result.nearest.assign(static_cast<std::size_t>(n), 0);

  const Eigen::Index blocks = (n + options.block_rows - 1) / options.block_rows;
  parallel_for(static_cast<std::size_t>(blocks), options.workers, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * options.block_rows;
    const Eigen::Index rows = std::min(options.block_rows, n - begin);
    const Eigen::MatrixXd cos = (gen_unit.middleRows(begin, rows) * train_unit.transpose()).cwiseAbs();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index i = begin + r;
      const double approx_max = cos.row(r).maxCoeff();
      double best = -1.0;
      Eigen::Index best_j = 0;
      for (Eigen::Index j = 0; j < cos.cols(); ++j) {
        if (cos(r, j) < approx_max - detail::kCandidateSlack) continue;
        const double exact = detail::exact_abs_cosine(&generated.data()(i, 0), &train.data()(j, 0), dim,
                                                      generated.squared_norms()[i], train.squared_norms()[j]);
        if (exact > best) {
          best = exact;
          best_j = j;
        }
      }
      best_cos[static_cast<std::size_t>(i)] = best;
      result.nearest[static_cast<std::size_t>(i)] = best_j;
    }
  });

  double sum = 0.0;
  for (const double c : best_cos) sum += 1.0 - c;
  result.distance = std::clamp(sum / static_cast<double>(n), 0.0, 1.0);
  return result;
}

/// 1 / (s + epsilon) when s < tau, else exactly 1.
inline double memorization_penalty(double s, double tau, double epsilon) {
  return s < tau ? 1.0 / (s + epsilon) : 1.0;
}

inline double memorization_penalty(double s, const PenaltyConfig& cfg) {
  return memorization_penalty(s, cfg.tau, cfg.epsilon);
}

/// Penalized score. Returns `fid` untouched when s >= tau; otherwise
/// fid / (s + epsilon), which equals penalty * fid up to one rounding.
inline double penalized_score(double fid_value, double s, double tau, double epsilon) {
  return s < tau ? fid_value / (s + epsilon) : fid_value;
}

struct MifidResult {
  double score = 0.0;
  MemorizationReport report;
  double fid = 0.0;
};

inline MemorizationReport make_report(const NearestNeighborResult& nn, const PenaltyConfig& cfg) {
  MemorizationReport report;
  report.distance = nn.distance;
  report.penalty = memorization_penalty(nn.distance, cfg);
  report.penalized = nn.distance < cfg.tau;
  report.tau = cfg.tau;
  report.epsilon = cfg.epsilon;
  report.space_id = cfg.space_id;
  report.nearest_indices = nn.nearest;
  return report;
}

/// Memorization-penalized FID of `generated` against the training set.
inline MifidResult mifid(const FeatureMatrix& generated, const FeatureMatrix& train, const PenaltyConfig& cfg,
                         const SearchOptions& search = {}, const FrechetOptions& frechet = {}) {
  cfg.validate();
  if (cfg.space_id != generated.space_id() || cfg.space_id != train.space_id()) {
    throw ConfigError("mifid: penalty configured for space '" + cfg.space_id + "' but features are in '" +
                      generated.space_id() + "' and '" + train.space_id() + "'");
  }
  MifidResult result;
  result.fid = fid(generated, train, frechet);
  result.report = make_report(memorization_distance(generated, train, search), cfg);
  result.score = penalized_score(result.fid, result.report.distance, cfg.tau, cfg.epsilon);
  return result;
}

inline nlohmann::json to_json(const MemorizationReport& report, bool include_indices = false) {
  nlohmann::json j = {
      {"distance", report.distance}, {"penalty", report.penalty}, {"penalized", report.penalized},
      {"tau", report.tau},           {"epsilon", report.epsilon}, {"space_id", report.space_id},
  };
  if (include_indices) j["nearest_indices"] = report.nearest_indices;
  return j;
}

}  // namespace mifid

#endif  // MIFID_MEMORIZATION_HPP
