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
#ifndef MIFID_SYNTH_HPP
#define MIFID_SYNTH_HPP

// Synthetic competition fields with known ground truth.
//
// Every row lives in a latent space whose first `signal_dim` coordinates
// carry the data distribution and whose remaining "detail" coordinates are
// nearly constant on the training set. A projection space is a fixed random
// linear map of the latent; the amplified space additionally scales the
// detail coordinates, so departures from the training manifold look larger
// there while training rows barely move.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mifid/analysis.hpp"
#include "mifid/calibration.hpp"
#include "mifid/error.hpp"
#include "mifid/feature_store.hpp"
#include "mifid/memorization.hpp"
#include "mifid/parallel.hpp"
#include "mifid/persistence.hpp"
#include "mifid/pipeline.hpp"
#include "mifid/text.hpp"

namespace mifid::synth {

enum class GeneratorKind { copy, noisy_copy, augment, sampler };

inline std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::copy: return "copy";
    case GeneratorKind::noisy_copy: return "noisy_copy";
    case GeneratorKind::augment: return "augment";
    case GeneratorKind::sampler: return "sampler";
  }
  return "";
}

/// One synthetic submission. Only the fields of its kind are used:
/// noisy_copy adds N(0, sigma^2 I) to training rows; augment blends
/// lambda * x_i + (1 - lambda) * x_j; sampler draws fresh signal from
/// N(offset * u, scale^2 I) with detail coordinates of std `detail`.
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::sampler;
  double sigma = 0.0;
  double lambda = 1.0;
  double offset = 0.0;
  double scale = 1.0;
  double detail = 0.3;

  Label label() const { return kind == GeneratorKind::sampler ? Label::legitimate : Label::memorized; }
  std::optional<LabelDetail> label_detail() const {
    switch (kind) {
      case GeneratorKind::copy: return LabelDetail::sup;
      case GeneratorKind::noisy_copy: return LabelDetail::ae;
      case GeneratorKind::augment: return LabelDetail::aug;
      case GeneratorKind::sampler: return std::nullopt;
    }
    return std::nullopt;
  }
};

struct SynthScenario {
  std::uint64_t seed = 20190813;
  Eigen::Index train_n = 2000;
  Eigen::Index gen_n = 500;
  Eigen::Index dim = 64;
  Eigen::Index signal_dim = 16;
  /// Std of the detail coordinates on the training set.
  double detail_scale = 0.05;
  /// Detail-coordinate gain of the private projection space (1 = none).
  double amplification = 2.0;
  Eigen::Index classes = 10;
  std::size_t teams = 10;
  std::string public_space = "synth-base";
  std::string private_space = "synth-amplified";
  std::vector<GeneratorSpec> generators;

  /// 2 copies, 4 noisy copies, 3 augmenters and 11 samplers of graded
  /// quality, spread over 10 teams of two.
  static SynthScenario default_scenario() {
    SynthScenario s;
    s.generators.push_back({GeneratorKind::copy});
    s.generators.push_back({GeneratorKind::copy});
    for (const double sigma : {0.02, 0.04, 0.06, 0.08}) s.generators.push_back({GeneratorKind::noisy_copy, sigma});
    for (const double lambda : {0.95, 0.9, 0.85}) {
      GeneratorSpec g{GeneratorKind::augment};
      g.lambda = lambda;
      s.generators.push_back(g);
    }
    constexpr int kSamplers = 11;
    for (int i = 0; i < kSamplers; ++i) {
      const double t = static_cast<double>(i) / (kSamplers - 1);
      GeneratorSpec g{GeneratorKind::sampler};
      g.offset = 1.0 * t;
      g.scale = 1.0;
      g.detail = 0.15 + 0.25 * t;
      s.generators.push_back(g);
    }
    return s;
  }

  void validate() const {
    if (train_n < 2 || gen_n < 2) throw ConfigError("synth: train_n and gen_n must be at least 2");
    if (signal_dim < 1 || signal_dim > dim) throw ConfigError("synth: signal_dim must lie in [1, dim]");
    if (!(detail_scale > 0.0) || !(amplification > 0.0)) throw ConfigError("synth: detail_scale and amplification must be positive");
    if (classes < 2) throw ConfigError("synth: need at least 2 classes");
    if (teams < 1) throw ConfigError("synth: need at least one team");
    if (generators.empty()) throw ConfigError("synth: scenario has no submissions");
    if (public_space == private_space) throw ConfigError("synth: public and private spaces must differ");
    for (const auto& g : generators) {
      switch (g.kind) {
        case GeneratorKind::copy: break;
        case GeneratorKind::noisy_copy:
          if (!(g.sigma > 0.0)) throw ConfigError("synth: noisy_copy sigma must be positive");
          break;
        case GeneratorKind::augment:
          if (!(g.lambda > 0.0 && g.lambda <= 1.0)) throw ConfigError("synth: augment lambda must lie in (0, 1]");
          break;
        case GeneratorKind::sampler:
          if (!(g.scale > 0.0) || !(g.detail > 0.0)) throw ConfigError("synth: sampler scale and detail must be positive");
          break;
      }
    }
  }

  /// Reads the `[synth]` section of a config file; missing keys keep the
  /// default scenario's values.
  static SynthScenario from(const text::KeyValueConfig& kv) {
    SynthScenario s = default_scenario();
    s.seed = static_cast<std::uint64_t>(kv.get_int("synth.seed", static_cast<std::int64_t>(s.seed)));
    s.train_n = kv.get_int("synth.train_n", s.train_n);
    s.gen_n = kv.get_int("synth.gen_n", s.gen_n);
    s.dim = kv.get_int("synth.dim", s.dim);
    s.signal_dim = kv.get_int("synth.signal_dim", std::min(s.signal_dim, s.dim));
    s.detail_scale = kv.get_double("synth.detail_scale", s.detail_scale);
    s.amplification = kv.get_double("synth.amplification", s.amplification);
    s.classes = kv.get_int("synth.classes", s.classes);
    s.teams = static_cast<std::size_t>(kv.get_int("synth.teams", static_cast<std::int64_t>(s.teams)));
    s.public_space = kv.get("synth.public_space", s.public_space);
    s.private_space = kv.get("synth.private_space", s.private_space);

    const bool custom = kv.has("synth.copies") || kv.has("synth.noisy_sigmas") || kv.has("synth.augment_lambdas") ||
                        kv.has("synth.samplers");
    if (custom) {
      s.generators.clear();
      for (std::int64_t i = 0; i < kv.get_int("synth.copies", 0); ++i) s.generators.push_back({GeneratorKind::copy});
      for (const double sigma : text::parse_double_list(kv.get("synth.noisy_sigmas", ""), "noisy_sigmas")) {
        s.generators.push_back({GeneratorKind::noisy_copy, sigma});
      }
      for (const double lambda : text::parse_double_list(kv.get("synth.augment_lambdas", ""), "augment_lambdas")) {
        GeneratorSpec g{GeneratorKind::augment};
        g.lambda = lambda;
        s.generators.push_back(g);
      }
      const auto samplers = kv.get_int("synth.samplers", 0);
      const double offset_max = kv.get_double("synth.sampler_offset_max", 1.0);
      const double detail_min = kv.get_double("synth.sampler_detail_min", 0.15);
      const double detail_max = kv.get_double("synth.sampler_detail_max", 0.4);
      const double scale = kv.get_double("synth.sampler_scale", 1.0);
      for (std::int64_t i = 0; i < samplers; ++i) {
        const double t = samplers > 1 ? static_cast<double>(i) / static_cast<double>(samplers - 1) : 0.0;
        GeneratorSpec g{GeneratorKind::sampler};
        g.offset = offset_max * t;
        g.scale = scale;
        g.detail = detail_min + (detail_max - detail_min) * t;
        s.generators.push_back(g);
      }
    }
    s.validate();
    return s;
  }
};

struct SynthSubmission {
  std::string submission_id;
  std::string team_id;
  std::int64_t timestamp = 0;
  GeneratorSpec spec;
  std::map<std::string, FeatureMatrix> features;  // by space id
  RowMatrix probabilities;
};

struct SynthField {
  std::map<std::string, FeatureMatrix> train;  // by space id
  std::vector<SynthSubmission> submissions;
};

namespace detail {

class Normal {
 public:
  explicit Normal(std::uint64_t seed) : rng_(seed) {}
  double operator()() { return dist_(rng_); }
  std::uint64_t index(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng_); }
  RowMatrix matrix(Eigen::Index rows, Eigen::Index cols) {
    RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (*this)();
    return m;
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> dist_{0.0, 1.0};
};

// Independent stream per purpose so that adding submissions leaves earlier
// ones unchanged.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Random orthogonal * diag(uniform[0.7, 1.3]) * random orthogonal.
inline Eigen::MatrixXd random_projection(Eigen::Index dim, std::uint64_t seed) {
  Normal rng(seed);
  const Eigen::MatrixXd q1 = Eigen::HouseholderQR<Eigen::MatrixXd>(rng.matrix(dim, dim)).householderQ();
  const Eigen::MatrixXd q2 = Eigen::HouseholderQR<Eigen::MatrixXd>(rng.matrix(dim, dim)).householderQ();
  std::uniform_real_distribution<double> unif(0.7, 1.3);
  Eigen::VectorXd sv(dim);
  for (Eigen::Index i = 0; i < dim; ++i) sv[i] = unif(rng.engine());
  return q1 * sv.asDiagonal() * q2;
}

inline RowMatrix softmax_rows(const RowMatrix& logits) {
  RowMatrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      p(i, j) = std::exp(logits(i, j) - m);
      sum += p(i, j);
    }
    p.row(i) /= sum;
  }
  return p;
}

enum : std::uint64_t { kStreamTrain = 0, kStreamPublic = 1, kStreamPrivate = 2, kStreamClassifier = 3, kStreamDirection = 4,
                       kStreamSubmissions = 16 };

}  // namespace detail

/// Builds the training set and every submission, projected into both spaces.
/// Deterministic for a fixed scenario.
inline SynthField generate_field(const SynthScenario& scn) {
  scn.validate();
  const Eigen::Index dim = scn.dim;
  const Eigen::Index k = scn.signal_dim;

  detail::Normal train_rng(detail::stream_seed(scn.seed, detail::kStreamTrain));
  RowMatrix train_latent = train_rng.matrix(scn.train_n, dim);
  train_latent.rightCols(dim - k) *= scn.detail_scale;

  const Eigen::MatrixXd proj_public = detail::random_projection(dim, detail::stream_seed(scn.seed, detail::kStreamPublic));
  Eigen::MatrixXd proj_private = detail::random_projection(dim, detail::stream_seed(scn.seed, detail::kStreamPrivate));
  proj_private.rightCols(dim - k) *= scn.amplification;

  detail::Normal cls_rng(detail::stream_seed(scn.seed, detail::kStreamClassifier));
  const Eigen::MatrixXd classifier = cls_rng.matrix(k, scn.classes) * 1.5;

  detail::Normal dir_rng(detail::stream_seed(scn.seed, detail::kStreamDirection));
  Eigen::RowVectorXd direction = dir_rng.matrix(1, k).row(0);
  direction.normalize();

  auto project = [&](const RowMatrix& latent, const Eigen::MatrixXd& proj) -> RowMatrix {
    return latent * proj.transpose();
  };

  SynthField field;
  field.train.emplace(scn.public_space, FeatureMatrix(project(train_latent, proj_public), scn.public_space, "train"));
  field.train.emplace(scn.private_space, FeatureMatrix(project(train_latent, proj_private), scn.private_space, "train"));

  const std::size_t width = std::to_string(scn.generators.size()).size();
  for (std::size_t s = 0; s < scn.generators.size(); ++s) {
    const auto& spec = scn.generators[s];
    detail::Normal rng(detail::stream_seed(scn.seed, detail::kStreamSubmissions + s));
    RowMatrix latent(scn.gen_n, dim);
    const auto n_train = static_cast<std::uint64_t>(scn.train_n);
    switch (spec.kind) {
      case GeneratorKind::copy: {
        // Distinct training rows while they last.
        std::vector<Eigen::Index> perm(static_cast<std::size_t>(scn.train_n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        for (Eigen::Index i = 0; i < scn.gen_n; ++i) latent.row(i) = train_latent.row(perm[static_cast<std::size_t>(i) % perm.size()]);
        break;
      }
      case GeneratorKind::noisy_copy:
        for (Eigen::Index i = 0; i < scn.gen_n; ++i) {
          latent.row(i) = train_latent.row(static_cast<Eigen::Index>(rng.index(n_train)));
          for (Eigen::Index d = 0; d < dim; ++d) latent(i, d) += spec.sigma * rng();
        }
        break;
      case GeneratorKind::augment:
        for (Eigen::Index i = 0; i < scn.gen_n; ++i) {
          const auto a = static_cast<Eigen::Index>(rng.index(n_train));
          const auto b = static_cast<Eigen::Index>(rng.index(n_train));
          latent.row(i) = spec.lambda * train_latent.row(a) + (1.0 - spec.lambda) * train_latent.row(b);
        }
        break;
      case GeneratorKind::sampler:
        for (Eigen::Index i = 0; i < scn.gen_n; ++i) {
          for (Eigen::Index d = 0; d < k; ++d) latent(i, d) = spec.offset * direction[d] + spec.scale * rng();
          for (Eigen::Index d = k; d < dim; ++d) latent(i, d) = spec.detail * rng();
        }
        break;
    }

    std::string index = std::to_string(s);
    index.insert(0, width - index.size(), '0');
    SynthSubmission sub;
    sub.submission_id = "sub-" + index;
    std::string team = std::to_string(s % scn.teams);
    team.insert(0, std::to_string(scn.teams - 1).size() - team.size(), '0');
    sub.team_id = "team-" + team;
    sub.timestamp = static_cast<std::int64_t>(s);
    sub.spec = spec;
    sub.features.emplace(scn.public_space, FeatureMatrix(project(latent, proj_public), scn.public_space, sub.submission_id));
    sub.features.emplace(scn.private_space, FeatureMatrix(project(latent, proj_private), scn.private_space, sub.submission_id));
    sub.probabilities = detail::softmax_rows(latent.leftCols(k) * classifier);
    field.submissions.push_back(std::move(sub));
  }
  return field;
}

/// Scoring configs matching a scenario's spaces, with a provisional tau.
inline std::pair<ScoringConfig, ScoringConfig> default_configs(const SynthScenario& scn, double tau = 0.1,
                                                               double epsilon = kDefaultEpsilon) {
  ScoringConfig pub{std::string(kPublic), scn.public_space, {}, {tau, epsilon, scn.public_space}};
  ScoringConfig priv{std::string(kPrivate), scn.private_space, {}, {tau, epsilon, scn.private_space}};
  return {pub, priv};
}

/// Scores the field in memory exactly as score_field would from disk.
inline std::vector<SubmissionRecord> score_synth_field(const SynthField& field, const ScoringConfig& pub,
                                                       const ScoringConfig& priv, unsigned workers = 0) {
  validate_config_pair(pub, priv);
  std::vector<SubmissionRecord> records(field.submissions.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const auto& sub = field.submissions[i];
    auto& rec = records[i];
    rec.submission_id = sub.submission_id;
    rec.team_id = sub.team_id;
    rec.timestamp = sub.timestamp;
    rec.selected = true;
    rec.label = sub.spec.label();
    rec.label_detail = sub.spec.label_detail();
    const double is = inception_score(ProbabilityMatrix(sub.probabilities, sub.submission_id));
    try {
      rec.public_score = score_features(sub.features.at(pub.space_id), field.train.at(pub.space_id), pub.penalty);
      rec.public_score->inception_score = is;
      rec.private_score = score_features(sub.features.at(priv.space_id), field.train.at(priv.space_id), priv.penalty);
      rec.private_score->inception_score = is;
    } catch (const Error& e) {
      rec.public_score.reset();
      rec.private_score.reset();
      rec.error = e.what();
    }
  });
  return records;
}

struct ScenarioRun {
  SynthField field;
  /// Scores under the provisional thresholds of the input configs.
  std::vector<SubmissionRecord> provisional;
  /// Scores after each config was rescored at its fitted threshold.
  std::vector<SubmissionRecord> records;
  SpaceSelection calibration;
  Leaderboard public_board;
  Leaderboard final_board;
  AnalysisReport analysis;
};

/// Field -> scores -> per-space calibration -> rescoring at tau* -> boards ->
/// analysis. Throws EmptyClassError when the field has no memorizers (or no
/// legitimate submissions), since no threshold can be fitted.
inline ScenarioRun run_scenario(const SynthScenario& scn, const ScoringConfig& pub, const ScoringConfig& priv,
                                unsigned workers = 0) {
  ScenarioRun run;
  run.field = generate_field(scn);
  run.provisional = score_synth_field(run.field, pub, priv, workers);

  std::map<std::string, std::vector<LabeledDistance>> per_space;
  per_space.emplace(pub.space_id, labeled_distances(run.provisional, kPublic));
  per_space.emplace(priv.space_id, labeled_distances(run.provisional, kPrivate));
  run.calibration = calibrate_spaces(per_space);

  run.records = rescore_with_threshold(run.provisional, run.calibration.per_space.at(pub.space_id).tau_star, kPublic);
  run.records = rescore_with_threshold(std::move(run.records), run.calibration.per_space.at(priv.space_id).tau_star, kPrivate);

  run.public_board = submission_board(run.records, kPublic);
  run.final_board = final_ranking(run.records);
  run.analysis = analyze_records(run.records);
  return run;
}

inline ScenarioRun run_scenario(const SynthScenario& scn, unsigned workers = 0) {
  const auto [pub, priv] = default_configs(scn);
  return run_scenario(scn, pub, priv, workers);
}

/// Writes the field as a standard competition tree:
///   train/<space>.npy, submissions/<id>/<space>.npy, submissions/<id>/probs.npy,
///   submissions.csv, labels.csv, config.toml
inline void write_field_tree(const SynthField& field, const SynthScenario& scn, const std::filesystem::path& root,
                             double tau = 0.1) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "train");
  for (const auto& [space, feats] : field.train) save_features(root / "train" / (space + ".npy"), feats);

  std::vector<SubmissionInfo> infos;
  std::map<std::string, LabelEntry> labels;
  for (const auto& sub : field.submissions) {
    const fs::path dir = root / "submissions" / sub.submission_id;
    for (const auto& [space, feats] : sub.features) save_features(feature_path(dir, space), feats);
    save_matrix(probabilities_path(dir), sub.probabilities);
    infos.push_back({sub.submission_id, sub.team_id, sub.timestamp, true, dir});
    labels.emplace(sub.submission_id, LabelEntry{sub.spec.label(), sub.spec.label_detail()});
  }
  write_submissions_csv(root / "submissions.csv", infos);
  write_labels_csv(root / "labels.csv", labels);

  std::ofstream cfg(root / "config.toml", std::ios::trunc);
  if (!cfg) throw FormatError((root / "config.toml").string() + ": cannot open for writing");
  cfg << "# synthetic field, seed " << scn.seed << "\n"
      << "submissions_dir = \"submissions\"\n"
      << "submissions_manifest = \"submissions.csv\"\n"
      << "labels = \"labels.csv\"\n"
      << "out_dir = \"out\"\n"
      << "workers = 0\n\n"
      << "[public]\n"
      << "space_id = \"" << scn.public_space << "\"\n"
      << "reference = \"train/" << scn.public_space << ".npy\"\n"
      << "tau = " << text::format_double(tau) << "\n"
      << "epsilon = " << text::format_double(kDefaultEpsilon) << "\n\n"
      << "[private]\n"
      << "space_id = \"" << scn.private_space << "\"\n"
      << "reference = \"train/" << scn.private_space << ".npy\"\n"
      << "tau = " << text::format_double(tau) << "\n"
      << "epsilon = " << text::format_double(kDefaultEpsilon) << "\n";
}

}  // namespace mifid::synth

#endif  // MIFID_SYNTH_HPP
