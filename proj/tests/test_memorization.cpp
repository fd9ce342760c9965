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
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "mifid/memorization.hpp"
#include "oracles.hpp"

namespace {

using mifid::FeatureMatrix;
using mifid::PenaltyConfig;
using mifid::RowMatrix;

std::vector<Eigen::Index> iota(Eigen::Index n) {
  std::vector<Eigen::Index> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), Eigen::Index{0});
  return v;
}

}  // namespace

TEST(MemorizationDistance, SelfIsZeroWithIdentityIndices) {
  std::mt19937_64 rng(1);
  const FeatureMatrix x(oracle::gaussian_matrix(300, 24, rng), "s");
  const auto r = mifid::memorization_distance(x, x);
  EXPECT_EQ(r.distance, 0.0);
  EXPECT_EQ(r.nearest, iota(300));
}

TEST(MemorizationDistance, OrthogonalRowsGiveOne) {
  RowMatrix train = RowMatrix::Zero(3, 4);
  train.row(0) << 1, 0, 0, 0;
  train.row(1) << 0, 2, 0, 0;
  train.row(2) << 1, -1, 0, 0;
  RowMatrix gen = RowMatrix::Zero(2, 4);
  gen.row(0) << 0, 0, 1, 0;
  gen.row(1) << 0, 0, 3, -4;
  const auto r = mifid::memorization_distance(FeatureMatrix(gen, "s"), FeatureMatrix(train, "s"));
  EXPECT_EQ(r.distance, 1.0);
  EXPECT_EQ(r.nearest, (std::vector<Eigen::Index>{0, 0}));
}

TEST(MemorizationDistance, MatchesDoubleLoop) {
  std::mt19937_64 rng(2);
  const RowMatrix gen = oracle::gaussian_matrix(50, 16, rng);
  const RowMatrix train = oracle::gaussian_matrix(200, 16, rng);
  const auto got = mifid::memorization_distance(FeatureMatrix(gen, "s"), FeatureMatrix(train, "s"));
  const auto want = oracle::memorization_distance(gen, train);
  EXPECT_NEAR(got.distance, want.distance, 1e-9);
  EXPECT_EQ(got.nearest, want.index);
}

TEST(MemorizationDistance, SignOfRowsIgnored) {
  std::mt19937_64 rng(3);
  const RowMatrix gen = oracle::gaussian_matrix(40, 8, rng);
  const RowMatrix train = oracle::gaussian_matrix(60, 8, rng);
  const auto a = mifid::memorization_distance(FeatureMatrix(gen, "s"), FeatureMatrix(train, "s"));
  const auto b = mifid::memorization_distance(FeatureMatrix(-gen, "s"), FeatureMatrix(train, "s"));
  EXPECT_NEAR(a.distance, b.distance, 1e-15);
  EXPECT_EQ(a.nearest, b.nearest);
}

TEST(MemorizationDistance, ScaleInvariant) {
  std::mt19937_64 rng(4);
  const RowMatrix gen = oracle::gaussian_matrix(40, 8, rng);
  const RowMatrix train = oracle::gaussian_matrix(60, 8, rng);
  const auto a = mifid::memorization_distance(FeatureMatrix(gen, "s"), FeatureMatrix(train, "s"));
  const auto b = mifid::memorization_distance(FeatureMatrix(gen * 1e3, "s"), FeatureMatrix(train * 1e-2, "s"));
  EXPECT_NEAR(a.distance, b.distance, 1e-12);
}

TEST(MemorizationDistance, TiesGoToLowestTrainingIndex) {
  std::mt19937_64 rng(5);
  RowMatrix train = oracle::gaussian_matrix(10, 6, rng);
  train.row(7) = train.row(2);
  train.row(9) = -2.0 * train.row(2);
  RowMatrix gen(2, 6);
  gen.row(0) = train.row(9);
  gen.row(1) = train.row(2) * 0.5;
  const auto r = mifid::memorization_distance(FeatureMatrix(gen, "s"), FeatureMatrix(train, "s"));
  EXPECT_EQ(r.nearest, (std::vector<Eigen::Index>{2, 2}));
}

TEST(MemorizationDistance, BlockingAndWorkersDoNotChangeResult) {
  std::mt19937_64 rng(6);
  const FeatureMatrix gen(oracle::gaussian_matrix(700, 32, rng), "s");
  const FeatureMatrix train(oracle::gaussian_matrix(900, 32, rng), "s");
  const auto base = mifid::memorization_distance(gen, train);
  for (const Eigen::Index block : {1, 7, 256, 5000}) {
    for (const unsigned workers : {1u, 3u, 8u}) {
      const auto r = mifid::memorization_distance(gen, train, {block, workers});
      EXPECT_EQ(r.distance, base.distance) << block << "/" << workers;
      EXPECT_EQ(r.nearest, base.nearest);
    }
  }
}

TEST(MemorizationDistance, MismatchesRejected) {
  std::mt19937_64 rng(7);
  const FeatureMatrix a(oracle::gaussian_matrix(5, 4, rng), "p");
  const FeatureMatrix b(oracle::gaussian_matrix(5, 4, rng), "q");
  const FeatureMatrix c(oracle::gaussian_matrix(5, 3, rng), "p");
  EXPECT_THROW(mifid::memorization_distance(a, b), mifid::ConfigError);
  EXPECT_THROW(mifid::memorization_distance(a, c), mifid::ConfigError);
}

TEST(Penalty, BoundaryIsNotPenalized) {
  EXPECT_EQ(mifid::memorization_penalty(0.1, 0.1, 1e-6), 1.0);
}

TEST(Penalty, ZeroDistance) {
  EXPECT_DOUBLE_EQ(mifid::memorization_penalty(0.0, 0.1, 1e-6), 1e6);
}

TEST(Penalty, BelowThreshold) {
  EXPECT_NEAR(mifid::memorization_penalty(0.05, 0.1, 1e-6), 1.0 / 0.050001, 1e-12);
  EXPECT_NEAR(mifid::memorization_penalty(0.05, 0.1, 1e-6), 19.9996, 1e-4);
}

TEST(Penalty, ScoreBranches) {
  EXPECT_EQ(mifid::penalized_score(42.5, 0.3, 0.1, 1e-6), 42.5);
  EXPECT_NEAR(mifid::penalized_score(42.5, 0.05, 0.1, 1e-6), 42.5 / 0.050001, 1e-12 * 42.5 / 0.05);
}

TEST(Penalty, ConfigValidation) {
  EXPECT_NO_THROW((PenaltyConfig{0.1, 1e-6, "s"}.validate()));
  EXPECT_THROW((PenaltyConfig{0.0, 1e-6, "s"}.validate()), mifid::ConfigError);
  EXPECT_THROW((PenaltyConfig{1.0, 1e-6, "s"}.validate()), mifid::ConfigError);
  EXPECT_THROW((PenaltyConfig{0.1, 0.0, "s"}.validate()), mifid::ConfigError);
  EXPECT_THROW((PenaltyConfig{0.1, 0.01, "s"}.validate()), mifid::ConfigError);
}

TEST(Mifid, CopyOfTrainingSetIsFlagged) {
  std::mt19937_64 rng(8);
  const FeatureMatrix train(oracle::gaussian_matrix(200, 12, rng), "s");
  const auto r = mifid::mifid(train, train, {0.1, 1e-6, "s"});
  EXPECT_EQ(r.report.distance, 0.0);
  EXPECT_TRUE(r.report.penalized);
  EXPECT_DOUBLE_EQ(r.report.penalty, 1e6);
  EXPECT_LE(r.fid, 1e-6);
  EXPECT_EQ(r.score, r.fid / 1e-6);
}

TEST(Mifid, UnpenalizedScoreIsFid) {
  std::mt19937_64 rng(9);
  const FeatureMatrix train(oracle::gaussian_matrix(300, 8, rng), "s");
  const FeatureMatrix gen(oracle::gaussian_matrix(200, 8, rng), "s");
  const auto r = mifid::mifid(gen, train, {0.01, 1e-6, "s"});
  ASSERT_GE(r.report.distance, 0.01);
  EXPECT_FALSE(r.report.penalized);
  EXPECT_EQ(r.report.penalty, 1.0);
  EXPECT_EQ(r.score, r.fid);
}

TEST(Mifid, MemorizerScoresWorseThanSampler) {
  std::mt19937_64 rng(10);
  constexpr int kD = 32;
  const RowMatrix train = oracle::gaussian_matrix(1000, kD, rng);
  RowMatrix memorizer = train.topRows(500) + 0.01 * oracle::gaussian_matrix(500, kD, rng);
  RowMatrix sampler = oracle::gaussian_matrix(500, kD, rng);
  sampler.col(0).array() += 0.05;
  const FeatureMatrix t(train, "s");
  const auto mem = mifid::mifid(FeatureMatrix(memorizer, "s"), t, {0.1, 1e-6, "s"});
  const auto smp = mifid::mifid(FeatureMatrix(sampler, "s"), t, {0.1, 1e-6, "s"});
  EXPECT_TRUE(mem.report.penalized);
  EXPECT_FALSE(smp.report.penalized);
  EXPECT_LT(std::abs(std::log10(mem.fid / smp.fid)), 1.0);
  EXPECT_GT(mem.score, smp.score);
}

TEST(Mifid, SpaceMismatchIsConfigError) {
  std::mt19937_64 rng(11);
  const FeatureMatrix a(oracle::gaussian_matrix(5, 4, rng), "p");
  EXPECT_THROW(mifid::mifid(a, a, {0.1, 1e-6, "q"}), mifid::ConfigError);
}

TEST(Mifid, ReportInvariantAcrossThresholds) {
  std::mt19937_64 rng(12);
  const FeatureMatrix train(oracle::gaussian_matrix(100, 6, rng), "s");
  const FeatureMatrix gen(train.data().topRows(50) + 0.3 * oracle::gaussian_matrix(50, 6, rng), "s");
  const auto nn = mifid::memorization_distance(gen, train);
  for (double tau = 0.01; tau < 0.99; tau += 0.02) {
    const auto rep = mifid::make_report(nn, {tau, 1e-6, "s"});
    EXPECT_EQ(rep.penalized, rep.distance < tau);
    EXPECT_EQ(rep.penalty == 1.0, !rep.penalized);
  }
  const auto j = mifid::to_json(mifid::make_report(nn, {0.5, 1e-6, "s"}), true);
  EXPECT_EQ(j.at("nearest_indices").size(), 50u);
  EXPECT_EQ(j.at("space_id"), "s");
}
