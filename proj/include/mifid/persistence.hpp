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
#ifndef MIFID_PERSISTENCE_HPP
#define MIFID_PERSISTENCE_HPP

// On-disk formats of a scoring run: run configuration, submission manifest,
// per-submission score.json, records.json, leaderboard CSVs and the run
// manifest.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mifid/calibration.hpp"
#include "mifid/error.hpp"
#include "mifid/pipeline.hpp"
#include "mifid/text.hpp"
#include "mifid/version.hpp"

namespace mifid {

// --- JSON -----------------------------------------------------------------

inline void to_json(nlohmann::json& j, const ScoreTuple& t) {
  j = {{"fid", t.fid},         {"s", t.s},     {"penalty", t.penalty},     {"mifid", t.mifid},
       {"penalized", t.penalized}, {"tau", t.tau}, {"epsilon", t.epsilon}};
  if (t.inception_score) j["inception_score"] = *t.inception_score;
}

inline void from_json(const nlohmann::json& j, ScoreTuple& t) {
  j.at("fid").get_to(t.fid);
  j.at("s").get_to(t.s);
  j.at("penalty").get_to(t.penalty);
  j.at("mifid").get_to(t.mifid);
  j.at("penalized").get_to(t.penalized);
  j.at("tau").get_to(t.tau);
  j.at("epsilon").get_to(t.epsilon);
  if (j.contains("inception_score")) t.inception_score = j.at("inception_score").get<double>();
}

inline void to_json(nlohmann::json& j, const SubmissionRecord& r) {
  j = {{"submission_id", r.submission_id},
       {"team_id", r.team_id},
       {"timestamp", r.timestamp},
       {"selected", r.selected},
       {"label", std::string(to_string(r.label))},
       {"label_detail", r.label_detail ? std::string(to_string(*r.label_detail)) : std::string()},
       {"verdict", std::string(to_string(r.verdict))},
       {"error", r.error}};
  j["public"] = r.public_score ? nlohmann::json(*r.public_score) : nlohmann::json(nullptr);
  j["private"] = r.private_score ? nlohmann::json(*r.private_score) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, SubmissionRecord& r) {
  j.at("submission_id").get_to(r.submission_id);
  j.at("team_id").get_to(r.team_id);
  j.at("timestamp").get_to(r.timestamp);
  j.at("selected").get_to(r.selected);
  r.label = parse_label(j.at("label").get<std::string>());
  r.label_detail = parse_label_detail(j.at("label_detail").get<std::string>());
  r.verdict = parse_verdict(j.at("verdict").get<std::string>());
  j.at("error").get_to(r.error);
  r.public_score.reset();
  r.private_score.reset();
  if (!j.at("public").is_null()) r.public_score = j.at("public").get<ScoreTuple>();
  if (!j.at("private").is_null()) r.private_score = j.at("private").get<ScoreTuple>();
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_records(const std::filesystem::path& path, const std::vector<SubmissionRecord>& records) {
  write_json(path, nlohmann::json(records));
}

inline std::vector<SubmissionRecord> read_records(const std::filesystem::path& path) {
  try {
    return read_json(path).get<std::vector<SubmissionRecord>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- leaderboard CSV ------------------------------------------------------

/// `rank,team_id,submission_id,score,note`; unranked entries have empty rank
/// and score and carry their note.
inline void write_leaderboard_csv(const std::filesystem::path& path, const Leaderboard& board) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << "rank,team_id,submission_id,score,note\n";
  for (const auto& e : board.entries) {
    out << e.rank << ',' << e.team_id << ',' << e.submission_id << ',' << text::format_double(e.score) << ",\n";
  }
  for (const auto& u : board.unranked) {
    std::string note = u.note;
    std::replace(note.begin(), note.end(), ',', ';');
    std::replace(note.begin(), note.end(), '\n', ' ');
    out << ',' << u.team_id << ',' << u.submission_id << ",," << note << '\n';
  }
}

inline Leaderboard read_leaderboard_csv(const std::filesystem::path& path, std::string config_name = {}) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open");
  Leaderboard board;
  board.config_name = std::move(config_name);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv_line(line);
    if (f.size() < 4) throw FormatError(path.string() + ": malformed leaderboard row '" + line + "'");
    if (f[0].empty()) {
      board.unranked.push_back({f[1], f[2], f.size() > 4 ? f[4] : std::string()});
    } else {
      board.entries.push_back({static_cast<std::size_t>(text::parse_int(f[0], "rank")), f[1], f[2],
                               text::parse_double(f[3], "score")});
    }
  }
  return board;
}

// --- submissions manifest -------------------------------------------------

/// Reads `submission_id,team_id,timestamp,selected` and resolves each
/// submission's directory under `submissions_dir`.
inline std::vector<SubmissionInfo> read_submissions_csv(const std::filesystem::path& path,
                                                        const std::filesystem::path& submissions_dir) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open submissions manifest");
  std::vector<SubmissionInfo> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv_line(line);
    if (line_no == 1 && f[0] == "submission_id") continue;
    if (f.size() < 4) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
    SubmissionInfo info;
    info.submission_id = f[0];
    info.team_id = f[1];
    info.timestamp = text::parse_int(f[2], "timestamp");
    info.selected = f[3] == "1" || f[3] == "true";
    info.directory = submissions_dir / info.submission_id;
    out.push_back(std::move(info));
  }
  return out;
}

inline void write_submissions_csv(const std::filesystem::path& path, const std::vector<SubmissionInfo>& subs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << "submission_id,team_id,timestamp,selected\n";
  for (const auto& s : subs) out << s.submission_id << ',' << s.team_id << ',' << s.timestamp << ',' << (s.selected ? 1 : 0) << '\n';
}

/// Without a manifest every subdirectory is its own team's single selected
/// submission, timestamped in sorted-name order.
inline std::vector<SubmissionInfo> discover_submissions(const std::filesystem::path& submissions_dir) {
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(submissions_dir)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<SubmissionInfo> out;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const auto id = dirs[i].filename().string();
    out.push_back({id, id, static_cast<std::int64_t>(i), true, dirs[i]});
  }
  return out;
}

/// Reads `submission_id,verdict` rows.
inline std::vector<std::pair<std::string, ReviewVerdict>> read_review_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open review file");
  std::vector<std::pair<std::string, ReviewVerdict>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv_line(line);
    if (line_no == 1 && f[0] == "submission_id") continue;
    if (f.size() < 2) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 2 fields");
    out.emplace_back(f[0], parse_verdict(f[1]));
  }
  return out;
}

// --- run configuration ----------------------------------------------------

/// Everything a scoring run needs, read from the key = value config file.
/// Relative paths are resolved against the config file's directory.
struct RunConfig {
  std::filesystem::path submissions_dir;
  std::filesystem::path submissions_manifest;  // optional
  std::filesystem::path labels;                // optional
  std::filesystem::path out_dir;
  unsigned workers = 0;
  ScoringConfig pub;
  ScoringConfig priv;
  std::string digest;

  static RunConfig from(const text::KeyValueConfig& kv, const std::filesystem::path& base_dir = {}) {
    auto resolve = [&](const std::string& p) -> std::filesystem::path {
      if (p.empty()) return {};
      const std::filesystem::path path(p);
      return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    RunConfig rc;
    rc.submissions_dir = resolve(kv.get("submissions_dir"));
    rc.submissions_manifest = resolve(kv.get("submissions_manifest", ""));
    rc.labels = resolve(kv.get("labels", ""));
    rc.out_dir = resolve(kv.get("out_dir", "out"));
    rc.workers = static_cast<unsigned>(kv.get_int("workers", 0));
    for (auto* cfg : {&rc.pub, &rc.priv}) {
      const std::string name(cfg == &rc.pub ? kPublic : kPrivate);
      cfg->name = name;
      cfg->space_id = kv.get(name + ".space_id");
      cfg->reference_set = resolve(kv.get(name + ".reference"));
      cfg->penalty.tau = kv.get_double(name + ".tau", 0.1);
      cfg->penalty.epsilon = kv.get_double(name + ".epsilon", kDefaultEpsilon);
      cfg->penalty.space_id = cfg->space_id;
    }
    validate_config_pair(rc.pub, rc.priv);
    rc.digest = text::fingerprint(kv.canonical());
    return rc;
  }

  std::vector<SubmissionInfo> submissions() const {
    if (!submissions_manifest.empty()) return read_submissions_csv(submissions_manifest, submissions_dir);
    return discover_submissions(submissions_dir);
  }

  std::filesystem::path records_path() const { return out_dir / "records.json"; }
  std::filesystem::path leaderboard_path(std::string_view name) const {
    return out_dir / ("leaderboard_" + std::string(name) + ".csv");
  }
  std::filesystem::path score_path(const std::string& submission_id) const {
    return out_dir / "scores" / submission_id / "score.json";
  }
};

inline nlohmann::json score_document(const SubmissionRecord& record, const RunConfig& rc) {
  nlohmann::json j = record;
  j["config_digest"] = rc.digest;
  j["engine_version"] = std::string(kEngineVersion);
  j["public_space"] = rc.pub.space_id;
  j["private_space"] = rc.priv.space_id;
  return j;
}

/// Writes score.json per submission, records.json, both leaderboards and the
/// run manifest. Writes happen sequentially on the calling thread.
inline void persist_run(const RunConfig& rc, const text::KeyValueConfig& kv, const std::vector<SubmissionRecord>& records,
                        const std::string& timestamp) {
  std::filesystem::create_directories(rc.out_dir);
  for (const auto& rec : records) write_json(rc.score_path(rec.submission_id), score_document(rec, rc));
  write_records(rc.records_path(), records);
  write_leaderboard_csv(rc.leaderboard_path(kPublic), submission_board(records, kPublic, BoardMetric::mifid, timestamp));
  write_leaderboard_csv(rc.leaderboard_path(kPrivate), final_ranking(records, timestamp));

  std::size_t failed = 0;
  for (const auto& rec : records) failed += rec.failed() ? 1 : 0;
  nlohmann::json manifest = {{"engine_version", std::string(kEngineVersion)},
                             {"config_digest", rc.digest},
                             {"config", kv.values()},
                             {"created", timestamp},
                             {"submissions", records.size()},
                             {"failed", failed}};
  write_json(rc.out_dir / "run_manifest.json", manifest);
}

}  // namespace mifid

#endif  // MIFID_PERSISTENCE_HPP
