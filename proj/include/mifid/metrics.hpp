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
#ifndef MIFID_METRICS_HPP
#define MIFID_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "mifid/error.hpp"
#include "mifid/feature_store.hpp"

namespace mifid {

/// Gaussian summary (mean, covariance) of a feature set.
struct GaussianStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::Index n = 0;

  Eigen::Index dim() const noexcept { return mu.size(); }
};

inline constexpr double kSymmetryTolerance = 1e-8;
/// Eigenvalues down to -kPsdTolerance * lambda_max count as round-off and are
/// clipped to zero; anything more negative is rejected.
inline constexpr double kPsdTolerance = 1e-6;
/// Largest negative Frechet distance accepted (and clamped to 0).
inline constexpr double kNegativeDistanceTolerance = 1e-6;
/// Bound on ||S*S - P||_F / ||P||_F for the square root S of P = sigma_a * sigma_b.
inline constexpr double kSqrtResidualTolerance = 1e-6;

/// Column mean and unbiased (N-1) covariance of the rows of `x`.
inline GaussianStats fit_gaussian(const RowMatrix& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw InsufficientSamplesError("fit_gaussian needs at least 2 samples, got " + std::to_string(n));
  GaussianStats stats;
  stats.n = n;
  stats.mu = x.colwise().mean().transpose();
  Eigen::MatrixXd centered = x.rowwise() - stats.mu.transpose();
  // One refinement pass removes the rounding error of the first mean, so
  // constant columns center to exact zeros.
  const Eigen::VectorXd correction = centered.colwise().mean().transpose();
  stats.mu += correction;
  centered.rowwise() -= correction.transpose();
  stats.sigma = (centered.transpose() * centered) / static_cast<double>(n - 1);
  stats.sigma = (0.5 * (stats.sigma + stats.sigma.transpose())).eval();
  return stats;
}

inline GaussianStats fit_gaussian(const FeatureMatrix& feats) { return fit_gaussian(feats.data()); }

namespace detail {

inline void check_stats(const GaussianStats& g, const char* which) {
  if (g.sigma.rows() != g.dim() || g.sigma.cols() != g.dim()) {
    throw ConfigError(std::string(which) + ": covariance shape does not match mean dimension");
  }
  if (!g.mu.allFinite() || !g.sigma.allFinite()) {
    throw ValidationError(std::string(which) + ": non-finite Gaussian statistics");
  }
  const double scale = std::max(1.0, g.sigma.cwiseAbs().maxCoeff());
  if ((g.sigma - g.sigma.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
    throw ValidationError(std::string(which) + ": covariance is not symmetric");
  }
}

/// Eigen-decomposition of a symmetric PSD matrix with round-off clipping.
struct SymmetricSpectrum {
  Eigen::VectorXd values;  // clipped to >= 0
  Eigen::MatrixXd vectors;
  double max_value = 0.0;

  Eigen::MatrixXd sqrt() const {
    return vectors * values.cwiseSqrt().asDiagonal() * vectors.transpose();
  }

  /// Pseudo-inverse of sqrt(); eigenvalues below `cutoff * max_value` are
  /// treated as zero.
  Eigen::MatrixXd pinv_sqrt(double cutoff = 1e-12) const {
    Eigen::VectorXd inv(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      inv[i] = values[i] > cutoff * max_value && values[i] > 0.0 ? 1.0 / std::sqrt(values[i]) : 0.0;
    }
    return vectors * inv.asDiagonal() * vectors.transpose();
  }
};

inline SymmetricSpectrum psd_spectrum(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericError(std::string(what) + ": eigendecomposition failed");
  SymmetricSpectrum s;
  s.values = es.eigenvalues();
  s.vectors = es.eigenvectors();
  s.max_value = s.values.size() > 0 ? std::max(0.0, s.values.maxCoeff()) : 0.0;
  const double min_value = s.values.size() > 0 ? s.values.minCoeff() : 0.0;
  if (min_value < -kPsdTolerance * s.max_value) {
    throw NumericError(std::string(what) + ": matrix is not positive semidefinite (min eigenvalue " +
                       std::to_string(min_value) + ", max " + std::to_string(s.max_value) + ")");
  }
  s.values = s.values.cwiseMax(0.0);
  return s;
}

struct ProductRoot {
  double trace = 0.0;
  Eigen::MatrixXd root;  // (C C^T)^(1/2), only when requested
};

/// Singular values of C = root_x * root_y give Tr (C C^T)^(1/2); the left
/// singular vectors give the root itself.
inline ProductRoot product_root(const Eigen::MatrixXd& root_x, const Eigen::MatrixXd& root_y, bool with_root) {
  const Eigen::MatrixXd c = root_x * root_y;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(c, with_root ? Eigen::ComputeThinU : 0);
  if (svd.info() != Eigen::Success) throw NumericError("frechet_distance: singular value decomposition failed");
  ProductRoot out;
  out.trace = svd.singularValues().sum();
  if (with_root) {
    const Eigen::MatrixXd& u = svd.matrixU();
    out.root = u * svd.singularValues().asDiagonal() * u.transpose();
  }
  return out;
}

inline double relative_residual(const Eigen::MatrixXd& s, const Eigen::MatrixXd& p) {
  const double denom = p.norm();
  const double num = (s * s - p).norm();
  return denom > 0.0 ? num / denom : num;
}

}  // namespace detail

struct FrechetOptions {
  /// Reconstruct the square root of sigma_a * sigma_b explicitly and check
  /// its residual. Costs a few extra D^3 products.
  bool verify_sqrt = true;
};

struct FrechetResult {
  double distance = 0.0;
  double mean_term = 0.0;
  double trace_term = 0.0;
  /// ||S*S - P||_F / ||P||_F, or NaN when verification was skipped.
  double sqrt_residual = std::numeric_limits<double>::quiet_NaN();
};

/// ||mu_a - mu_b||^2 + Tr(sigma_a + sigma_b - 2 (sigma_a sigma_b)^(1/2)).
///
/// With C = sigma_a^(1/2) sigma_b^(1/2) = U S V^T, the symmetric matrix
/// M = sigma_a^(1/2) sigma_b sigma_a^(1/2) = C C^T is similar to
/// sigma_a sigma_b, so Tr (sigma_a sigma_b)^(1/2) = sum of singular values
/// of C. Singular values keep full absolute accuracy where eigenvalues of M
/// followed by a square root would lose half the digits of the small ones.
/// With `verify_sqrt` the principal root
///   R = sigma_a^(1/2) M^(1/2) sigma_a^(-1/2),  M^(1/2) = U S U^T
/// is built and its residual checked; when sigma_a is singular the roles of
/// the two covariances are swapped before giving up.
inline FrechetResult frechet_distance_detailed(const GaussianStats& a, const GaussianStats& b,
                                               const FrechetOptions& options = {}) {
  if (a.dim() != b.dim()) {
    throw ConfigError("frechet_distance: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                      std::to_string(b.dim()) + ")");
  }
  detail::check_stats(a, "frechet_distance(a)");
  detail::check_stats(b, "frechet_distance(b)");

  FrechetResult result;
  result.mean_term = (a.mu - b.mu).squaredNorm();

  const auto spec_a = detail::psd_spectrum(a.sigma, "covariance a");
  const auto spec_b = detail::psd_spectrum(b.sigma, "covariance b");
  const Eigen::MatrixXd root_a = spec_a.sqrt();
  const Eigen::MatrixXd root_b = spec_b.sqrt();
  const auto inner_a = detail::product_root(root_a, root_b, options.verify_sqrt);
  const double trace_sqrt = inner_a.trace;

  result.trace_term = a.sigma.trace() + b.sigma.trace() - 2.0 * trace_sqrt;
  const double total = result.mean_term + result.trace_term;
  if (total < -kNegativeDistanceTolerance) {
    throw NumericError("frechet_distance: result " + std::to_string(total) + " is negative beyond round-off");
  }
  result.distance = std::max(0.0, total);

  if (options.verify_sqrt) {
    const Eigen::MatrixXd product = a.sigma * b.sigma;
    const Eigen::MatrixXd s_ab = root_a * inner_a.root * spec_a.pinv_sqrt();
    result.sqrt_residual = detail::relative_residual(s_ab, product);
    if (!(result.sqrt_residual <= kSqrtResidualTolerance)) {
      // sqrt(AB) = sqrt(BA)^T; build sqrt(BA) from sigma_b's root instead.
      const auto inner_b = detail::product_root(root_b, root_a, true);
      const Eigen::MatrixXd s_ba = root_b * inner_b.root * spec_b.pinv_sqrt();
      result.sqrt_residual = std::min(result.sqrt_residual, detail::relative_residual(s_ba.transpose(), product));
    }
    if (!(result.sqrt_residual <= kSqrtResidualTolerance)) {
      throw NumericError("frechet_distance: matrix square root residual " + std::to_string(result.sqrt_residual) +
                         " exceeds tolerance");
    }
  }
  return result;
}

inline double frechet_distance(const GaussianStats& a, const GaussianStats& b, const FrechetOptions& options = {}) {
  return frechet_distance_detailed(a, b, options).distance;
}

inline double fid(const FeatureMatrix& generated, const FeatureMatrix& reference, const FrechetOptions& options = {}) {
  if (generated.space_id() != reference.space_id()) {
    throw ConfigError("fid: projection spaces differ ('" + generated.space_id() + "' vs '" + reference.space_id() +
                      "')");
  }
  return frechet_distance(fit_gaussian(generated), fit_gaussian(reference), options);
}

/// Mean over rows of KL(p(y|x) || p(y)), with 0 log 0 = 0. Clamped to
/// [0, log C], its exact range.
inline double log_inception_score(const ProbabilityMatrix& probs) {
  const RowMatrix& p = probs.data();
  const Eigen::RowVectorXd marginal = p.colwise().mean();
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double kl = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double pij = p(i, j);
      if (pij > 0.0) kl += pij * (std::log(pij) - std::log(marginal[j]));
    }
    total += kl;
  }
  const double mean_kl = total / static_cast<double>(p.rows());
  return std::clamp(mean_kl, 0.0, std::log(static_cast<double>(p.cols())));
}

/// exp of log_inception_score; lies in [1, C].
inline double inception_score(const ProbabilityMatrix& probs) {
  return std::clamp(std::exp(log_inception_score(probs)), 1.0, static_cast<double>(probs.classes()));
}

}  // namespace mifid

#endif  // MIFID_METRICS_HPP
