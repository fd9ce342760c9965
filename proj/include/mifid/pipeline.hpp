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
#ifndef MIFID_PIPELINE_HPP
#define MIFID_PIPELINE_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mifid/calibration.hpp"
#include "mifid/error.hpp"
#include "mifid/feature_store.hpp"
#include "mifid/memorization.hpp"
#include "mifid/metrics.hpp"
#include "mifid/parallel.hpp"

namespace mifid {

inline constexpr std::string_view kPublic = "public";
inline constexpr std::string_view kPrivate = "private";

struct ScoringConfig {
  std::string name;  // "public" or "private"
  std::string space_id;
  std::filesystem::path reference_set;
  PenaltyConfig penalty;

  void validate() const {
    if (name != kPublic && name != kPrivate) throw ConfigError("scoring config name must be public or private, got '" + name + "'");
    if (space_id.empty()) throw ConfigError("scoring config '" + name + "' has no space_id");
    if (penalty.space_id != space_id) {
      throw ConfigError("scoring config '" + name + "': penalty calibrated for '" + penalty.space_id +
                        "' but scoring space is '" + space_id + "'");
    }
    penalty.validate();
  }
};

/// Public and private scoring must not share a projection space.
inline void validate_config_pair(const ScoringConfig& pub, const ScoringConfig& priv) {
  pub.validate();
  priv.validate();
  if (pub.name != kPublic || priv.name != kPrivate) throw ConfigError("expected a (public, private) config pair");
  if (pub.space_id == priv.space_id) {
    throw ConfigError("public and private scoring share projection space '" + pub.space_id + "'");
  }
}

/// (fid, s, penalty, mifid) for one submission under one config, with the
/// threshold that produced it.
struct ScoreTuple {
  double fid = 0.0;
  double s = 1.0;
  double penalty = 1.0;
  double mifid = 0.0;
  bool penalized = false;
  double tau = 0.0;
  double epsilon = kDefaultEpsilon;
  std::optional<double> inception_score;

  friend bool operator==(const ScoreTuple&, const ScoreTuple&) = default;
};

enum class ReviewVerdict { none, exonerated, disqualified };

inline std::string_view to_string(ReviewVerdict v) {
  switch (v) {
    case ReviewVerdict::none: return "none";
    case ReviewVerdict::exonerated: return "exonerated";
    case ReviewVerdict::disqualified: return "disqualified";
  }
  return "none";
}

inline ReviewVerdict parse_verdict(std::string_view text) {
  if (text == "exonerated") return ReviewVerdict::exonerated;
  if (text == "disqualified") return ReviewVerdict::disqualified;
  if (text == "none" || text.empty()) return ReviewVerdict::none;
  throw ValidationError("unknown review verdict '" + std::string(text) + "'");
}

struct SubmissionRecord {
  std::string submission_id;
  std::string team_id;
  std::int64_t timestamp = 0;
  std::optional<ScoreTuple> public_score;
  std::optional<ScoreTuple> private_score;
  /// Non-empty when scoring failed; the record stays on the board unranked.
  std::string error;
  Label label = Label::unlabeled;
  std::optional<LabelDetail> label_detail;
  bool selected = false;
  ReviewVerdict verdict = ReviewVerdict::none;

  bool failed() const noexcept { return !error.empty(); }

  const std::optional<ScoreTuple>& score(std::string_view config) const {
    if (config == kPublic) return public_score;
    if (config == kPrivate) return private_score;
    throw ConfigError("unknown scoring config '" + std::string(config) + "'");
  }
  std::optional<ScoreTuple>& score(std::string_view config) {
    return const_cast<std::optional<ScoreTuple>&>(std::as_const(*this).score(config));
  }

  friend bool operator==(const SubmissionRecord&, const SubmissionRecord&) = default;
};

struct LeaderboardEntry {
  std::size_t rank = 0;
  std::string team_id;
  std::string submission_id;
  double score = 0.0;

  friend bool operator==(const LeaderboardEntry&, const LeaderboardEntry&) = default;
};

struct UnrankedEntry {
  std::string team_id;
  std::string submission_id;
  std::string note;

  friend bool operator==(const UnrankedEntry&, const UnrankedEntry&) = default;
};

/// Ascending scores, dense ranks from 1. `timestamp` is informational and
/// supplied by the caller.
struct Leaderboard {
  std::string config_name;
  std::vector<LeaderboardEntry> entries;
  std::vector<UnrankedEntry> unranked;
  std::string timestamp;

  std::optional<std::size_t> rank_of(std::string_view submission_id) const {
    for (const auto& e : entries) {
      if (e.submission_id == submission_id) return e.rank;
    }
    return std::nullopt;
  }
};

/// Scores one feature set against the reference set of `cfg`.
inline ScoreTuple score_features(const FeatureMatrix& generated, const FeatureMatrix& reference,
                                 const PenaltyConfig& penalty, const SearchOptions& search = {}) {
  const auto result = mifid(generated, reference, penalty, search);
  ScoreTuple t;
  t.fid = result.fid;
  t.s = result.report.distance;
  t.penalty = result.report.penalty;
  t.mifid = result.score;
  t.penalized = result.report.penalized;
  t.tau = penalty.tau;
  t.epsilon = penalty.epsilon;
  return t;
}

/// Scores `<submission_dir>/<space_id>.npy` against a loaded reference set.
/// When `probs.npy` is present the Inception Score is attached as well.
inline ScoreTuple score_submission(const std::filesystem::path& submission_dir, const ScoringConfig& cfg,
                                   const FeatureMatrix& reference, const SearchOptions& search = {}) {
  cfg.validate();
  if (reference.space_id() != cfg.space_id) {
    throw ConfigError("reference set is in space '" + reference.space_id() + "', config '" + cfg.name + "' expects '" +
                      cfg.space_id + "'");
  }
  const auto path = feature_path(submission_dir, cfg.space_id);
  if (!std::filesystem::exists(path)) throw FormatError(path.string() + ": missing feature file");
  auto tuple = score_features(load_features(path, cfg.space_id), reference, cfg.penalty, search);
  const auto probs = probabilities_path(submission_dir);
  if (std::filesystem::exists(probs)) tuple.inception_score = inception_score(load_probabilities(probs));
  return tuple;
}

inline ScoreTuple score_submission(const std::filesystem::path& submission_dir, const ScoringConfig& cfg) {
  return score_submission(submission_dir, cfg, load_features(cfg.reference_set, cfg.space_id));
}

/// A submission directory plus the metadata the scorer does not derive.
struct SubmissionInfo {
  std::string submission_id;
  std::string team_id;
  std::int64_t timestamp = 0;
  bool selected = false;
  std::filesystem::path directory;
};

/// Scores every submission under both configs on a worker pool. Failures are
/// captured per record; records come back in input order.
inline std::vector<SubmissionRecord> score_field(std::span<const SubmissionInfo> submissions, const ScoringConfig& pub,
                                                 const ScoringConfig& priv,
                                                 const std::map<std::string, LabelEntry>& labels = {},
                                                 unsigned workers = 0) {
  validate_config_pair(pub, priv);
  const FeatureMatrix pub_ref = load_features(pub.reference_set, pub.space_id);
  const FeatureMatrix priv_ref = load_features(priv.reference_set, priv.space_id);

  std::vector<SubmissionRecord> records(submissions.size());
  parallel_for(submissions.size(), workers, [&](std::size_t i) {
    const auto& info = submissions[i];
    SubmissionRecord& rec = records[i];
    rec.submission_id = info.submission_id;
    rec.team_id = info.team_id;
    rec.timestamp = info.timestamp;
    rec.selected = info.selected;
    if (const auto it = labels.find(info.submission_id); it != labels.end()) {
      rec.label = it->second.label;
      rec.label_detail = it->second.label_detail;
    }
    try {
      rec.public_score = score_submission(info.directory, pub, pub_ref);
      rec.private_score = score_submission(info.directory, priv, priv_ref);
    } catch (const Error& e) {
      rec.public_score.reset();
      rec.private_score.reset();
      rec.error = e.what();
    }
  });
  return records;
}

/// Recomputes penalty and MiFID of one config from the stored (fid, s) with
/// a new threshold. Exonerated submissions keep penalty 1.
inline std::vector<SubmissionRecord> rescore_with_threshold(std::vector<SubmissionRecord> records, double new_tau,
                                                            std::string_view config = kPrivate) {
  if (!(new_tau >= 0.0 && new_tau <= 1.0)) {
    throw ConfigError("rescore threshold must lie in [0, 1], got " + std::to_string(new_tau));
  }
  for (auto& rec : records) {
    auto& tuple = rec.score(config);
    if (!tuple) continue;
    tuple->tau = new_tau;
    if (rec.verdict == ReviewVerdict::exonerated) {
      tuple->penalty = 1.0;
      tuple->mifid = tuple->fid;
      tuple->penalized = false;
      continue;
    }
    tuple->penalty = memorization_penalty(tuple->s, new_tau, tuple->epsilon);
    tuple->mifid = penalized_score(tuple->fid, tuple->s, new_tau, tuple->epsilon);
    tuple->penalized = tuple->s < new_tau;
  }
  return records;
}

/// Applies manual review: exonerated records lose their penalty (rebuttal
/// accepted), disqualified ones are kept but never ranked.
inline std::vector<SubmissionRecord> apply_review_outcome(
    std::vector<SubmissionRecord> records, std::span<const std::pair<std::string, ReviewVerdict>> overrides) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) index.emplace(records[i].submission_id, i);
  for (const auto& [id, verdict] : overrides) {
    const auto it = index.find(id);
    if (it == index.end()) throw ValidationError("review override for unknown submission '" + id + "'");
    if (verdict == ReviewVerdict::none) throw ValidationError("review verdict for '" + id + "' must be exonerated or disqualified");
    auto& rec = records[it->second];
    rec.verdict = verdict;
    if (verdict == ReviewVerdict::exonerated) {
      for (auto* tuple : {&rec.public_score, &rec.private_score}) {
        if (!*tuple) continue;
        (*tuple)->penalty = 1.0;
        (*tuple)->mifid = (*tuple)->fid;
        (*tuple)->penalized = false;
      }
    }
  }
  return records;
}

namespace detail {

struct Candidate {
  const SubmissionRecord* record;
  double score;
};

inline bool candidate_less(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score < b.score;
  if (a.record->timestamp != b.record->timestamp) return a.record->timestamp < b.record->timestamp;
  if (a.record->team_id != b.record->team_id) return a.record->team_id < b.record->team_id;
  return a.record->submission_id < b.record->submission_id;
}

inline std::string exclusion_note(const SubmissionRecord& rec, std::string_view config) {
  if (rec.failed()) return "failed: " + rec.error;
  if (rec.verdict == ReviewVerdict::disqualified) return "disqualified";
  const auto& t = rec.score(config);
  if (!t) return "not scored";
  if (t->penalized) return "penalized";
  return {};
}

}  // namespace detail

/// Final standings: each team's best (lowest) private MiFID over its selected
/// submissions, with penalized, disqualified and failed submissions removed
/// first. Equal scores go to the earlier submission, then the smaller
/// team_id. Teams with nothing left are listed as unranked.
inline Leaderboard final_ranking(std::span<const SubmissionRecord> records, std::string timestamp = {},
                                 std::string_view config = kPrivate) {
  std::map<std::string, std::vector<const SubmissionRecord*>> by_team;
  for (const auto& rec : records) {
    if (rec.selected) by_team[rec.team_id].push_back(&rec);
  }
  Leaderboard board;
  board.config_name = std::string(config);
  board.timestamp = std::move(timestamp);
  std::vector<detail::Candidate> best;
  for (const auto& [team, recs] : by_team) {
    if (recs.size() > 2) {
      throw ValidationError("team '" + team + "' selected " + std::to_string(recs.size()) +
                            " submissions for final scoring (at most 2 allowed)");
    }
    std::optional<detail::Candidate> team_best;
    for (const auto* rec : recs) {
      if (!rec->failed() && !rec->score(config)) {
        throw ValidationError("selected submission '" + rec->submission_id + "' has no " + std::string(config) +
                              " score");
      }
      const std::string note = detail::exclusion_note(*rec, config);
      if (!note.empty()) {
        board.unranked.push_back({rec->team_id, rec->submission_id, note});
        continue;
      }
      const detail::Candidate c{rec, rec->score(config)->mifid};
      if (!team_best || detail::candidate_less(c, *team_best)) team_best = c;
    }
    if (team_best) best.push_back(*team_best);
  }
  std::sort(best.begin(), best.end(), detail::candidate_less);
  for (std::size_t i = 0; i < best.size(); ++i) {
    board.entries.push_back({i + 1, best[i].record->team_id, best[i].record->submission_id, best[i].score});
  }
  return board;
}

enum class BoardMetric { mifid, fid };

/// Per-submission board for one config (the running leaderboard): every
/// scored, non-disqualified submission ranked by the chosen metric.
inline Leaderboard submission_board(std::span<const SubmissionRecord> records, std::string_view config,
                                    BoardMetric metric = BoardMetric::mifid, std::string timestamp = {}) {
  Leaderboard board;
  board.config_name = std::string(config);
  board.timestamp = std::move(timestamp);
  std::vector<detail::Candidate> ranked;
  for (const auto& rec : records) {
    const auto& t = rec.score(config);
    if (rec.failed() || !t) {
      board.unranked.push_back({rec.team_id, rec.submission_id, rec.failed() ? "failed: " + rec.error : "not scored"});
      continue;
    }
    if (rec.verdict == ReviewVerdict::disqualified) {
      board.unranked.push_back({rec.team_id, rec.submission_id, "disqualified"});
      continue;
    }
    ranked.push_back({&rec, metric == BoardMetric::mifid ? t->mifid : t->fid});
  }
  std::sort(ranked.begin(), ranked.end(), detail::candidate_less);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    board.entries.push_back({i + 1, ranked[i].record->team_id, ranked[i].record->submission_id, ranked[i].score});
  }
  return board;
}

/// The (submission, s, label) triples calibration works on.
inline std::vector<LabeledDistance> labeled_distances(std::span<const SubmissionRecord> records,
                                                      std::string_view config) {
  std::vector<LabeledDistance> out;
  for (const auto& rec : records) {
    const auto& t = rec.score(config);
    if (rec.failed() || !t) continue;
    out.push_back({rec.submission_id, t->s, rec.label, rec.label_detail});
  }
  return out;
}

}  // namespace mifid

#endif  // MIFID_PIPELINE_HPP
