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
#ifndef MIFID_ANALYSIS_HPP
#define MIFID_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mifid/calibration.hpp"
#include "mifid/error.hpp"
#include "mifid/pipeline.hpp"
#include "mifid/text.hpp"

namespace mifid {

/// Product-moment correlation, computed from centered sums.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("pearson: inputs have different lengths");
  if (x.size() < 2) throw UndefinedCorrelationError("pearson: need at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelationError("pearson: an input has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 1-based ranks; tied values share the average of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("spearman: inputs have different lengths");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

struct RankDifference {
  double absolute = 0.0;
  double pct = 0.0;
  std::size_t size = 0;
};

/// Mean |rank_a - rank_b| over the submissions of two boards, ranks
/// recomputed within `subset` when one is given.
inline RankDifference mean_abs_rank_difference(const Leaderboard& a, const Leaderboard& b,
                                               const std::optional<std::vector<std::string>>& subset = std::nullopt) {
  std::optional<std::set<std::string>> keep;
  if (subset) keep.emplace(subset->begin(), subset->end());
  auto subset_ranks = [&](const Leaderboard& board) {
    std::vector<LeaderboardEntry> entries = board.entries;
    std::stable_sort(entries.begin(), entries.end(),
                     [](const LeaderboardEntry& l, const LeaderboardEntry& r) { return l.rank < r.rank; });
    std::map<std::string, std::size_t> ranks;
    for (const auto& e : entries) {
      if (keep && !keep->contains(e.submission_id)) continue;
      const std::size_t next = ranks.size() + 1;
      if (!ranks.emplace(e.submission_id, next).second) {
        throw ConfigError("mean_abs_rank_difference: submission '" + e.submission_id + "' appears twice on a board");
      }
    }
    return ranks;
  };
  const auto ra = subset_ranks(a);
  const auto rb = subset_ranks(b);
  if (ra.size() != rb.size() || !std::equal(ra.begin(), ra.end(), rb.begin(), [](const auto& l, const auto& r) {
        return l.first == r.first;
      })) {
    throw ConfigError("mean_abs_rank_difference: boards cover different submission sets");
  }
  if (keep && ra.size() != keep->size()) {
    throw ConfigError("mean_abs_rank_difference: subset contains submissions missing from the boards");
  }
  if (ra.empty()) throw ConfigError("mean_abs_rank_difference: no submissions to compare");
  RankDifference out;
  out.size = ra.size();
  double total = 0.0;
  for (const auto& [id, rank] : ra) {
    const double d = static_cast<double>(rank) - static_cast<double>(rb.at(id));
    total += std::abs(d);
  }
  out.absolute = total / static_cast<double>(out.size);
  out.pct = 100.0 * out.absolute / static_cast<double>(out.size);
  return out;
}

struct Histogram {
  std::string config;
  std::string variable;  // "s" or "fid"
  std::string group;     // "all", a label, or "memorized:<detail>"
  std::vector<double> edges;
  std::vector<std::size_t> counts;

  std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
};

struct HistogramOptions {
  std::size_t s_bins = 50;
  std::size_t fid_bins = 50;
};

namespace detail {

inline std::size_t bin_index(const std::vector<double>& edges, double v) {
  const std::size_t bins = edges.size() - 1;
  if (!(v > edges.front())) return 0;
  if (v >= edges.back()) return bins - 1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), v);
  return std::min(bins - 1, static_cast<std::size_t>(it - edges.begin()) - 1);
}

}  // namespace detail

/// Distributions of s (fixed-width bins over [0, 1]) and FID (log-spaced
/// bins over the observed positive range) per label and per memorization
/// type. Every label group is emitted, empty or not.
inline std::vector<Histogram> label_histograms(std::span<const SubmissionRecord> records, std::string_view config,
                                               const HistogramOptions& options = {}) {
  if (options.s_bins == 0 || options.fid_bins == 0) throw ConfigError("label_histograms: bin counts must be positive");
  std::vector<double> s_edges(options.s_bins + 1);
  for (std::size_t k = 0; k <= options.s_bins; ++k) s_edges[k] = static_cast<double>(k) / static_cast<double>(options.s_bins);

  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& rec : records) {
    const auto& t = rec.score(config);
    if (rec.failed() || !t) continue;
    if (t->fid > 0.0) lo = std::min(lo, t->fid);
    hi = std::max(hi, t->fid);
  }
  if (!std::isfinite(lo)) lo = 1.0;
  if (!(hi > lo)) hi = lo * 10.0;
  std::vector<double> fid_edges(options.fid_bins + 1);
  const double log_lo = std::log(lo);
  const double step = (std::log(hi) - log_lo) / static_cast<double>(options.fid_bins);
  for (std::size_t k = 0; k <= options.fid_bins; ++k) fid_edges[k] = std::exp(log_lo + step * static_cast<double>(k));
  fid_edges.front() = lo;
  fid_edges.back() = hi;

  std::vector<std::string> groups = {"all", "legitimate", "memorized", "unlabeled"};
  std::set<std::string> details;
  for (const auto& rec : records) {
    if (rec.label_detail) details.insert("memorized:" + std::string(to_string(*rec.label_detail)));
  }
  groups.insert(groups.end(), details.begin(), details.end());

  std::vector<Histogram> out;
  for (const auto& group : groups) {
    Histogram hs{std::string(config), "s", group, s_edges, std::vector<std::size_t>(options.s_bins, 0)};
    Histogram hf{std::string(config), "fid", group, fid_edges, std::vector<std::size_t>(options.fid_bins, 0)};
    for (const auto& rec : records) {
      const auto& t = rec.score(config);
      if (rec.failed() || !t) continue;
      const bool member = group == "all" || group == to_string(rec.label) ||
                          (rec.label_detail && group == "memorized:" + std::string(to_string(*rec.label_detail)));
      if (!member) continue;
      ++hs.counts[detail::bin_index(s_edges, t->s)];
      ++hf.counts[detail::bin_index(fid_edges, t->fid)];
    }
    out.push_back(std::move(hs));
    out.push_back(std::move(hf));
  }
  return out;
}

inline void write_histograms_csv(const std::filesystem::path& path, const std::vector<Histogram>& histograms) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << "config,variable,group,bin,bin_lo,bin_hi,count\n";
  for (const auto& h : histograms) {
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
      out << h.config << ',' << h.variable << ',' << h.group << ',' << k << ',' << text::format_double(h.edges[k]) << ','
          << text::format_double(h.edges[k + 1]) << ',' << h.counts[k] << '\n';
    }
  }
}

/// One submission's FID under both projection spaces, as in a released
/// results table.
struct FieldRow {
  std::string submission_id;
  double public_fid = 0.0;
  double private_fid = 0.0;
  Label label = Label::unlabeled;
};

struct CrossSpaceStats {
  std::optional<double> spearman;
  RankDifference all;
  std::optional<RankDifference> legit_top;
};

namespace detail {

inline Leaderboard fid_board(std::span<const FieldRow> rows, bool use_public) {
  std::vector<const FieldRow*> order;
  for (const auto& r : rows) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [&](const FieldRow* a, const FieldRow* b) {
    const double fa = use_public ? a->public_fid : a->private_fid;
    const double fb = use_public ? b->public_fid : b->private_fid;
    if (fa != fb) return fa < fb;
    return a->submission_id < b->submission_id;
  });
  Leaderboard board;
  board.config_name = use_public ? std::string(kPublic) : std::string(kPrivate);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const double f = use_public ? order[i]->public_fid : order[i]->private_fid;
    board.entries.push_back({i + 1, {}, order[i]->submission_id, f});
  }
  return board;
}

}  // namespace detail

/// Spearman correlation of public vs private FID and the mean absolute rank
/// difference between the two FID orderings: over all rows, and over the
/// `top_k` best legitimate rows by private rank.
inline CrossSpaceStats cross_space_stats(std::span<const FieldRow> rows, std::size_t top_k = 500) {
  CrossSpaceStats out;
  std::vector<double> pub, priv;
  for (const auto& r : rows) {
    pub.push_back(r.public_fid);
    priv.push_back(r.private_fid);
  }
  try {
    out.spearman = spearman(pub, priv);
  } catch (const UndefinedCorrelationError&) {
    out.spearman.reset();
  }
  const auto board_pub = detail::fid_board(rows, true);
  const auto board_priv = detail::fid_board(rows, false);
  out.all = mean_abs_rank_difference(board_pub, board_priv);

  std::set<std::string> legit;
  for (const auto& r : rows) {
    if (r.label == Label::legitimate) legit.insert(r.submission_id);
  }
  std::vector<std::string> top;
  for (const auto& e : board_priv.entries) {
    if (top.size() >= top_k) break;
    if (legit.contains(e.submission_id)) top.push_back(e.submission_id);
  }
  if (!top.empty()) out.legit_top = mean_abs_rank_difference(board_pub, board_priv, top);
  return out;
}

/// Reads `submission_id,public_fid,private_fid[,label]`.
inline std::vector<FieldRow> read_field_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open field table");
  std::vector<FieldRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv_line(line);
    if (line_no == 1 && f[0] == "submission_id") continue;
    if (f.size() < 3) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected at least 3 fields");
    rows.push_back({f[0], text::parse_double(f[1], "public_fid"), text::parse_double(f[2], "private_fid"),
                    f.size() > 3 ? parse_label(f[3]) : Label::unlabeled});
  }
  return rows;
}

struct AnalysisOptions {
  std::size_t top_k = 500;
  HistogramOptions histograms;
};

struct AnalysisReport {
  /// Pearson(FID, s) over non-memorized submissions, per scoring config.
  std::map<std::string, std::optional<double>> pearson_fid_vs_s;
  std::optional<double> spearman_cross_space;
  double mean_abs_rank_diff = 0.0;
  double mean_abs_rank_diff_pct = 0.0;
  std::size_t field_size = 0;
  std::optional<RankDifference> legit_top;
  std::vector<Histogram> histograms;
};

/// Effective submissions are the selected ones (all of them when nothing is
/// selected) that were scored under both configs and not disqualified.
inline std::vector<FieldRow> effective_field(std::span<const SubmissionRecord> records) {
  const bool any_selected = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.selected; });
  std::vector<FieldRow> rows;
  for (const auto& rec : records) {
    if (any_selected && !rec.selected) continue;
    if (rec.failed() || !rec.public_score || !rec.private_score) continue;
    if (rec.verdict == ReviewVerdict::disqualified) continue;
    rows.push_back({rec.submission_id, rec.public_score->fid, rec.private_score->fid, rec.label});
  }
  return rows;
}

inline AnalysisReport analyze_records(std::span<const SubmissionRecord> records, const AnalysisOptions& options = {}) {
  AnalysisReport report;
  for (const auto config : {kPublic, kPrivate}) {
    std::vector<double> fids, ss;
    for (const auto& rec : records) {
      const auto& t = rec.score(config);
      if (rec.failed() || !t || rec.label == Label::memorized) continue;
      fids.push_back(t->fid);
      ss.push_back(t->s);
    }
    std::optional<double> r;
    if (fids.size() >= 2) {
      try {
        r = pearson(fids, ss);
      } catch (const UndefinedCorrelationError&) {
      }
    }
    report.pearson_fid_vs_s.emplace(std::string(config), r);
    auto h = label_histograms(records, config, options.histograms);
    report.histograms.insert(report.histograms.end(), h.begin(), h.end());
  }
  const auto field = effective_field(records);
  if (!field.empty()) {
    const auto stats = cross_space_stats(field, options.top_k);
    report.spearman_cross_space = stats.spearman;
    report.mean_abs_rank_diff = stats.all.absolute;
    report.mean_abs_rank_diff_pct = stats.all.pct;
    report.field_size = stats.all.size;
    report.legit_top = stats.legit_top;
  }
  return report;
}

inline nlohmann::json to_json(const RankDifference& d) {
  return {{"absolute", d.absolute}, {"pct", d.pct}, {"size", d.size}};
}

inline nlohmann::json to_json(const AnalysisReport& report) {
  nlohmann::json pearson_json = nlohmann::json::object();
  for (const auto& [config, r] : report.pearson_fid_vs_s) {
    pearson_json[config] = r ? nlohmann::json(*r) : nlohmann::json(nullptr);
  }
  nlohmann::json j = {
      {"pearson_fid_vs_s", pearson_json},
      {"spearman_cross_space", report.spearman_cross_space ? nlohmann::json(*report.spearman_cross_space) : nlohmann::json(nullptr)},
      {"mean_abs_rank_diff", report.mean_abs_rank_diff},
      {"mean_abs_rank_diff_pct", report.mean_abs_rank_diff_pct},
      {"field_size", report.field_size},
      {"legit_top", report.legit_top ? to_json(*report.legit_top) : nlohmann::json(nullptr)},
  };
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : report.histograms) {
    hist.push_back({{"config", h.config}, {"variable", h.variable}, {"group", h.group}, {"total", h.total()}});
  }
  j["histograms"] = hist;
  return j;
}

}  // namespace mifid

#endif  // MIFID_ANALYSIS_HPP
