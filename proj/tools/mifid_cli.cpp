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
// mifid: command-line front end of the scoring engine.
//
//   mifid synth      --out DIR [--set synth.key=value ...]
//   mifid score      --config FILE
//   mifid leaderboard --config FILE
//   mifid rescore    --config FILE --tau T [--board private|public|both]
//   mifid calibrate  --config FILE [--apply]
//   mifid review     --config FILE --apply REVIEW.csv
//   mifid analyze    --config FILE | --field-csv FILE
//
// Every config key can be overridden with --set key=value.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mifid/mifid.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
  auto* opt = cmd->add_option("-c,--config", c.config, "key = value config file");
  if (config_required) opt->required();
  cmd->add_option("--set", c.overrides, "override a config key (key=value)")->take_all();
}

mifid::text::KeyValueConfig load_config(const Common& c) {
  auto kv = c.config.empty() ? mifid::text::KeyValueConfig{} : mifid::text::KeyValueConfig::load(c.config);
  for (const auto& o : c.overrides) kv.apply_override(o);
  return kv;
}

fs::path base_dir(const Common& c) {
  return c.config.empty() ? fs::current_path() : fs::absolute(c.config).parent_path();
}

std::vector<mifid::SubmissionRecord> load_records(const mifid::RunConfig& rc) {
  if (!fs::exists(rc.records_path())) {
    throw mifid::ConfigError(rc.records_path().string() + " not found; run `mifid score` first");
  }
  return mifid::read_records(rc.records_path());
}

void print_board(const mifid::Leaderboard& board, std::size_t limit = 20) {
  std::printf("%s leaderboard (%zu ranked, %zu unranked)\n", board.config_name.c_str(), board.entries.size(),
              board.unranked.size());
  for (std::size_t i = 0; i < board.entries.size() && i < limit; ++i) {
    const auto& e = board.entries[i];
    std::printf("  %4zu  %-12s %-12s %.6g\n", e.rank, e.team_id.c_str(), e.submission_id.c_str(), e.score);
  }
  for (const auto& u : board.unranked) {
    std::printf("     -  %-12s %-12s %s\n", u.team_id.c_str(), u.submission_id.c_str(), u.note.c_str());
  }
}

void persist(const mifid::RunConfig& rc, const mifid::text::KeyValueConfig& kv,
             const std::vector<mifid::SubmissionRecord>& records) {
  mifid::persist_run(rc, kv, records, mifid::utc_timestamp());
  print_board(mifid::final_ranking(records, {}));
}

int cmd_synth(const Common& c, const std::string& out, double tau, bool run) {
  const auto kv = load_config(c);
  const auto scn = mifid::synth::SynthScenario::from(kv);
  const auto field = mifid::synth::generate_field(scn);
  mifid::synth::write_field_tree(field, scn, out, tau);
  std::printf("wrote %zu submissions (%s / %s, D=%lld) to %s\n", field.submissions.size(), scn.public_space.c_str(),
              scn.private_space.c_str(), static_cast<long long>(scn.dim), out.c_str());
  if (run) {
    const auto result = mifid::synth::run_scenario(scn);
    for (const auto& [space, fit] : result.calibration.per_space) {
      std::printf("  %-18s tau*=%.4f margin=%.4f misclassified=%zu\n", space.c_str(), fit.tau_star, fit.margin,
                  fit.misclassified);
    }
    std::printf("selected space: %s\n", result.calibration.space_id.c_str());
    print_board(result.final_board);
  }
  return 0;
}

int cmd_score(const Common& c) {
  const auto kv = load_config(c);
  const auto rc = mifid::RunConfig::from(kv, base_dir(c));
  std::map<std::string, mifid::LabelEntry> labels;
  if (!rc.labels.empty()) labels = mifid::read_labels_csv(rc.labels);
  const auto subs = rc.submissions();
  const auto records = mifid::score_field(subs, rc.pub, rc.priv, labels, rc.workers);
  std::size_t failed = 0;
  for (const auto& r : records) {
    if (r.failed()) {
      ++failed;
      std::fprintf(stderr, "warning: %s failed: %s\n", r.submission_id.c_str(), r.error.c_str());
    }
  }
  std::printf("scored %zu submissions (%zu failed) into %s\n", records.size(), failed, rc.out_dir.c_str());
  persist(rc, kv, records);
  return 0;
}

int cmd_leaderboard(const Common& c, bool by_fid) {
  const auto kv = load_config(c);
  const auto rc = mifid::RunConfig::from(kv, base_dir(c));
  const auto records = load_records(rc);
  const auto ts = mifid::utc_timestamp();
  const auto metric = by_fid ? mifid::BoardMetric::fid : mifid::BoardMetric::mifid;
  const auto pub = mifid::submission_board(records, mifid::kPublic, metric, ts);
  const auto fin = mifid::final_ranking(records, ts);
  mifid::write_leaderboard_csv(rc.leaderboard_path(mifid::kPublic), pub);
  mifid::write_leaderboard_csv(rc.leaderboard_path(mifid::kPrivate), fin);
  print_board(pub);
  print_board(fin);
  return 0;
}

int cmd_rescore(const Common& c, double tau, const std::string& board) {
  auto kv = load_config(c);
  const auto rc = mifid::RunConfig::from(kv, base_dir(c));
  auto records = load_records(rc);
  std::vector<std::string_view> configs;
  if (board == "public" || board == "both") configs.push_back(mifid::kPublic);
  if (board == "private" || board == "both") configs.push_back(mifid::kPrivate);
  for (const auto config : configs) {
    records = mifid::rescore_with_threshold(std::move(records), tau, config);
    kv.set("rescore." + std::string(config) + ".tau", mifid::text::format_double(tau));
  }
  std::printf("rescored %s at tau=%g\n", board.c_str(), tau);
  persist(rc, kv, records);
  return 0;
}

int cmd_calibrate(const Common& c, bool apply) {
  auto kv = load_config(c);
  const auto rc = mifid::RunConfig::from(kv, base_dir(c));
  auto records = load_records(rc);
  std::map<std::string, std::vector<mifid::LabeledDistance>> per_space;
  per_space.emplace(rc.pub.space_id, mifid::labeled_distances(records, mifid::kPublic));
  per_space.emplace(rc.priv.space_id, mifid::labeled_distances(records, mifid::kPrivate));
  const auto selection = mifid::calibrate_spaces(per_space);

  nlohmann::json j = {{"selected_space", selection.space_id}, {"spaces", nlohmann::json::object()}};
  for (const auto& [space, fit] : selection.per_space) {
    std::printf("%-20s tau*=%.6f margin=%.6f misclassified=%zu\n", space.c_str(), fit.tau_star, fit.margin,
                fit.misclassified);
    j["spaces"][space] = {{"tau_star", fit.tau_star},
                          {"margin", fit.margin},
                          {"method", std::string(mifid::to_string(fit.method))},
                          {"misclassified", fit.misclassified}};
  }
  std::printf("selected space: %s\n", selection.space_id.c_str());
  mifid::write_json(rc.out_dir / "calibration.json", j);

  if (apply) {
    for (const auto& cfg : {rc.pub, rc.priv}) {
      const double tau = selection.per_space.at(cfg.space_id).tau_star;
      records = mifid::rescore_with_threshold(std::move(records), tau, cfg.name);
      kv.set("rescore." + cfg.name + ".tau", mifid::text::format_double(tau));
    }
    persist(rc, kv, records);
  }
  return 0;
}

int cmd_review(const Common& c, const std::string& review_file) {
  auto kv = load_config(c);
  const auto rc = mifid::RunConfig::from(kv, base_dir(c));
  const auto overrides = mifid::read_review_csv(review_file);
  auto records = mifid::apply_review_outcome(load_records(rc), overrides);
  kv.set("review.file", fs::absolute(review_file).string());
  std::printf("applied %zu review verdicts\n", overrides.size());
  persist(rc, kv, records);
  return 0;
}

int cmd_analyze(const Common& c, const std::string& field_csv, std::size_t top_k, std::size_t s_bins,
                std::size_t fid_bins, const std::string& out_override) {
  if (!field_csv.empty()) {
    const auto rows = mifid::read_field_csv(field_csv);
    const auto st = mifid::cross_space_stats(rows, top_k);
    nlohmann::json j = {{"field_size", st.all.size},
                        {"spearman_cross_space", st.spearman ? nlohmann::json(*st.spearman) : nlohmann::json(nullptr)},
                        {"mean_abs_rank_diff", st.all.absolute},
                        {"mean_abs_rank_diff_pct", st.all.pct},
                        {"legit_top", st.legit_top ? mifid::to_json(*st.legit_top) : nlohmann::json(nullptr)}};
    std::cout << j.dump(2) << '\n';
    if (!out_override.empty()) mifid::write_json(fs::path(out_override) / "analysis_report.json", j);
    return 0;
  }
  if (c.config.empty()) throw mifid::ConfigError("analyze needs --config or --field-csv");
  const auto kv = load_config(c);
  const auto rc = mifid::RunConfig::from(kv, base_dir(c));
  const auto records = load_records(rc);
  mifid::AnalysisOptions opts;
  opts.top_k = top_k;
  opts.histograms = {s_bins, fid_bins};
  const auto report = mifid::analyze_records(records, opts);
  const fs::path out = out_override.empty() ? rc.out_dir : fs::path(out_override);
  auto j = mifid::to_json(report);
  j["config_digest"] = rc.digest;
  j["engine_version"] = std::string(mifid::kEngineVersion);
  mifid::write_json(out / "analysis_report.json", j);
  mifid::write_histograms_csv(out / "histograms.csv", report.histograms);
  j.erase("histograms");
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memorization-aware FID scoring engine"};
  app.set_version_flag("--version", std::string(mifid::kEngineVersion));
  app.require_subcommand(1);

  Common synth_c, score_c, board_c, rescore_c, calib_c, review_c, analyze_c;

  auto* synth = app.add_subcommand("synth", "write a synthetic competition field");
  add_common(synth, synth_c, false);
  std::string synth_out;
  double synth_tau = 0.1;
  bool synth_run = false;
  synth->add_option("-o,--out", synth_out, "output directory")->required();
  synth->add_option("--tau", synth_tau, "provisional threshold written to config.toml")->check(CLI::Range(0.0, 1.0));
  synth->add_flag("--run", synth_run, "also calibrate and rank the field in memory");

  auto* score = app.add_subcommand("score", "score every submission under both configs");
  add_common(score, score_c);

  auto* board = app.add_subcommand("leaderboard", "rebuild leaderboards from stored scores");
  add_common(board, board_c);
  bool board_fid = false;
  board->add_flag("--by-fid", board_fid, "rank the public board by plain FID");

  auto* rescore = app.add_subcommand("rescore", "recompute penalties at a new threshold");
  add_common(rescore, rescore_c);
  double rescore_tau = 0.0;
  std::string rescore_board = "private";
  rescore->add_option("--tau", rescore_tau, "new threshold")->required()->check(CLI::Range(0.0, 1.0));
  rescore->add_option("--board", rescore_board, "private, public or both")
      ->check(CLI::IsMember({"private", "public", "both"}));

  auto* calib = app.add_subcommand("calibrate", "fit tau* per space and select a projection space");
  add_common(calib, calib_c);
  bool calib_apply = false;
  calib->add_flag("--apply", calib_apply, "rescore each config at its fitted threshold");

  auto* review = app.add_subcommand("review", "apply manual review verdicts");
  add_common(review, review_c);
  std::string review_file;
  review->add_option("--apply", review_file, "CSV of submission_id,verdict")->required()->check(CLI::ExistingFile);

  auto* analyze = app.add_subcommand("analyze", "correlations, rank differences and histograms");
  add_common(analyze, analyze_c, false);
  std::string field_csv, analyze_out;
  std::size_t top_k = 500, s_bins = 50, fid_bins = 50;
  analyze->add_option("--field-csv", field_csv, "submission_id,public_fid,private_fid[,label] table")
      ->check(CLI::ExistingFile);
  analyze->add_option("--top-k", top_k, "legitimate submissions in the top subset");
  analyze->add_option("--s-bins", s_bins, "memorization-distance histogram bins")->check(CLI::PositiveNumber);
  analyze->add_option("--fid-bins", fid_bins, "FID histogram bins")->check(CLI::PositiveNumber);
  analyze->add_option("-o,--out", analyze_out, "output directory (default: out_dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(synth_c, synth_out, synth_tau, synth_run);
    if (*score) return cmd_score(score_c);
    if (*board) return cmd_leaderboard(board_c, board_fid);
    if (*rescore) return cmd_rescore(rescore_c, rescore_tau, rescore_board);
    if (*calib) return cmd_calibrate(calib_c, calib_apply);
    if (*review) return cmd_review(review_c, review_file);
    if (*analyze) return cmd_analyze(analyze_c, field_csv, top_k, s_bins, fid_bins, analyze_out);
  } catch (const mifid::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
