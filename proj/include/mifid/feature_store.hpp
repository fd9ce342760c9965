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
#ifndef MIFID_FEATURE_STORE_HPP
#define MIFID_FEATURE_STORE_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mifid/error.hpp"
#include "mifid/npy.hpp"

namespace mifid {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Embeddings of one image set in one projection space.
///
/// Validated on construction and immutable afterwards; copies share the
/// underlying storage, so handing a matrix to several scoring workers is
/// cheap. Squared row norms are computed once here and reused by the
/// nearest-neighbor search.
class FeatureMatrix {
 public:
  FeatureMatrix(RowMatrix data, std::string space_id, std::string set_id = {}) {
    validate(data);
    auto impl = std::make_shared<Impl>();
    impl->squared_norms = sequential_squared_norms(data);
    impl->data = std::move(data);
    impl->space_id = std::move(space_id);
    impl->set_id = std::move(set_id);
    impl_ = std::move(impl);
  }

  const RowMatrix& data() const noexcept { return impl_->data; }
  Eigen::Index rows() const noexcept { return impl_->data.rows(); }
  Eigen::Index dim() const noexcept { return impl_->data.cols(); }
  const std::string& space_id() const noexcept { return impl_->space_id; }
  const std::string& set_id() const noexcept { return impl_->set_id; }
  const Eigen::VectorXd& squared_norms() const noexcept { return impl_->squared_norms; }

  /// Left-to-right sums, matching the pairwise dot products of the
  /// nearest-neighbor refinement so that self-similarity is exactly 1.
  static Eigen::VectorXd sequential_squared_norms(const RowMatrix& data) {
    Eigen::VectorXd out(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < data.cols(); ++j) sum += data(i, j) * data(i, j);
      out[i] = sum;
    }
    return out;
  }

  /// Checks every FeatureMatrix invariant, throwing on the first class of
  /// violation found. Non-finite rows are reported before zero rows.
  static void validate(const RowMatrix& data) {
    if (data.rows() < 2) {
      throw InsufficientSamplesError("feature matrix needs at least 2 rows, got " + std::to_string(data.rows()));
    }
    if (data.cols() < 1) throw ValidationError("feature matrix has zero columns");
    std::vector<std::int64_t> non_finite;
    std::vector<std::int64_t> zero;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      bool finite = true;
      bool all_zero = true;
      for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const double v = data(i, j);
        if (!std::isfinite(v)) finite = false;
        if (v != 0.0) all_zero = false;
      }
      if (!finite) {
        non_finite.push_back(i);
      } else if (all_zero) {
        zero.push_back(i);
      }
    }
    if (!non_finite.empty()) throw ValidationError("non-finite feature values", std::move(non_finite));
    if (!zero.empty()) throw ValidationError("all-zero feature rows", std::move(zero));
  }

 private:
  struct Impl {
    RowMatrix data;
    Eigen::VectorXd squared_norms;
    std::string space_id;
    std::string set_id;
  };
  std::shared_ptr<const Impl> impl_;
};

/// Per-image class probabilities; rows sum to one.
class ProbabilityMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-5;

  /// Validates and renormalizes rows whose sum is within tolerance of 1.
  explicit ProbabilityMatrix(RowMatrix data, std::string set_id = {}) : set_id_(std::move(set_id)) {
    if (data.rows() < 1 || data.cols() < 1) throw ValidationError("probability matrix is empty");
    std::vector<std::int64_t> out_of_range;
    std::vector<std::int64_t> bad_sum;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      bool in_range = true;
      for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const double v = data(i, j);
        if (!(v >= 0.0 && v <= 1.0)) in_range = false;
      }
      if (!in_range) {
        out_of_range.push_back(i);
        continue;
      }
      const double sum = data.row(i).sum();
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        bad_sum.push_back(i);
      } else {
        data.row(i) /= sum;
      }
    }
    if (!out_of_range.empty()) throw ValidationError("probabilities outside [0, 1]", std::move(out_of_range));
    if (!bad_sum.empty()) throw ValidationError("probability rows do not sum to 1", std::move(bad_sum));
    data_ = std::move(data);
  }

  const RowMatrix& data() const noexcept { return data_; }
  Eigen::Index rows() const noexcept { return data_.rows(); }
  Eigen::Index classes() const noexcept { return data_.cols(); }
  const std::string& set_id() const noexcept { return set_id_; }

 private:
  RowMatrix data_;
  std::string set_id_;
};

namespace detail {

inline RowMatrix to_matrix(npy::Array array) {
  RowMatrix m(array.rows, array.cols);
  std::copy(array.values.begin(), array.values.end(), m.data());
  return m;
}

}  // namespace detail

inline FeatureMatrix load_features(const std::filesystem::path& path, std::string space_id) {
  return FeatureMatrix(detail::to_matrix(npy::read(path)), std::move(space_id),
                       path.parent_path().filename().string());
}

inline ProbabilityMatrix load_probabilities(const std::filesystem::path& path) {
  return ProbabilityMatrix(detail::to_matrix(npy::read(path)), path.parent_path().filename().string());
}

inline void save_matrix(const std::filesystem::path& path, const RowMatrix& m, npy::Dtype dtype = npy::Dtype::float64) {
  npy::write(path, std::span<const double>(m.data(), static_cast<std::size_t>(m.size())), m.rows(), m.cols(), dtype);
}

inline void save_features(const std::filesystem::path& path, const FeatureMatrix& features,
                          npy::Dtype dtype = npy::Dtype::float64) {
  save_matrix(path, features.data(), dtype);
}

/// `<submission_dir>/<space_id>.npy`
inline std::filesystem::path feature_path(const std::filesystem::path& submission_dir, const std::string& space_id) {
  return submission_dir / (space_id + ".npy");
}

inline std::filesystem::path probabilities_path(const std::filesystem::path& submission_dir) {
  return submission_dir / "probs.npy";
}

}  // namespace mifid

#endif  // MIFID_FEATURE_STORE_HPP
