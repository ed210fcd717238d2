/* Copyright 2026 The bsannot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsannot/classify.hpp"
#include "bsannot/error.hpp"
#include "bsannot/patterns.hpp"

namespace bsannot {

/// Seconds rounded to the millisecond, as reports print them.
inline double round_ms(double seconds) { return std::round(seconds * 1000.0) / 1000.0; }

struct DurationStats {
  double mean_s = 0.0;
  double median_s = 0.0;
  double p95_s = 0.0;  // linear interpolation between order statistics
  double max_s = 0.0;
};

/// Statistics of durations given in microseconds, reported in seconds.
inline DurationStats duration_stats(std::vector<std::int64_t> us) {
  DurationStats s;
  if (us.empty()) return s;
  std::sort(us.begin(), us.end());
  std::int64_t sum = 0;
  for (std::int64_t v : us) sum += v;
  const std::size_t n = us.size();
  auto sec = [](double v) { return v / 1e6; };
  s.mean_s = sec(static_cast<double>(sum) / static_cast<double>(n));
  s.median_s = n % 2 == 1 ? sec(static_cast<double>(us[n / 2]))
                          : sec(0.5 * static_cast<double>(us[n / 2 - 1] + us[n / 2]));
  const double pos = 0.95 * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(n - 1, lo + 1);
  s.p95_s = sec(static_cast<double>(us[lo]) + (pos - static_cast<double>(lo)) * static_cast<double>(us[hi] - us[lo]));
  s.max_s = sec(static_cast<double>(us.back()));
  return s;
}

enum class ReportGroup { kOriginal, kPredicted, kAuto, kExpertAdjusted };

inline std::string_view group_name(ReportGroup g) {
  switch (g) {
    case ReportGroup::kOriginal: return "Original";
    case ReportGroup::kPredicted: return "Predicted";
    case ReportGroup::kAuto: return "Auto";
    case ReportGroup::kExpertAdjusted: return "ExpertAdjusted";
  }
  return "?";
}

inline ReportGroup group_for(TrackSource s) {
  switch (s) {
    case TrackSource::kManual: return ReportGroup::kOriginal;
    case TrackSource::kPredicted: return ReportGroup::kPredicted;
    case TrackSource::kAuto: return ReportGroup::kAuto;
    case TrackSource::kExpertAdjusted: return ReportGroup::kExpertAdjusted;
  }
  return ReportGroup::kOriginal;
}

struct LabelDistribution {
  std::size_t count = 0;
  double normalized_count = 0.0;
  DurationStats duration;
};

struct DistributionReport {
  ReportGroup group = ReportGroup::kOriginal;
  std::size_t total = 0;
  bool empty = true;
  std::map<PatternLabel, LabelDistribution> labels;  // all five labels, None included
};

inline DistributionReport distribution(const LabelTrack& track, std::optional<ReportGroup> group = {}) {
  DistributionReport r;
  r.group = group.value_or(group_for(track.source()));
  r.total = track.size();
  r.empty = r.total == 0;
  std::map<PatternLabel, std::vector<std::int64_t>> durations;
  for (const Segment& s : track.segments()) durations[s.label()].push_back(s.duration_us());
  for (PatternLabel l : kAllLabels) {
    LabelDistribution& d = r.labels[l];
    d.count = durations[l].size();
    d.normalized_count = r.empty ? 0.0 : static_cast<double>(d.count) / static_cast<double>(r.total);
    d.duration = duration_stats(durations[l]);
  }
  return r;
}

struct AgreementConfig {
  double min_iou = 0.3;
  std::optional<double> span_s;  // recording length both tracks must fit in
};

struct MatchedPair {
  std::size_t reference = 0;  // indices into the event lists (None excluded)
  std::size_t candidate = 0;
  double iou = 0.0;
};

struct AgreementReport {
  std::size_t reference_events = 0;
  std::size_t candidate_events = 0;
  std::size_t matched = 0;
  std::size_t missed = 0;
  std::size_t spurious = 0;
  std::optional<double> boundary_mae_ms;  // mean of |d start| and |d end| over matches
  std::array<std::array<std::size_t, 4>, 4> confusion{};  // [reference][candidate]
  bool prevalence_order_preserved = true;
  std::vector<MatchedPair> pairs;
};

inline double iou(const Segment& a, const Segment& b) {
  const std::int64_t inter = std::min(a.end_us(), b.end_us()) - std::max(a.start_us(), b.start_us());
  if (inter <= 0) return 0.0;
  const std::int64_t uni = std::max(a.end_us(), b.end_us()) - std::min(a.start_us(), b.start_us());
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// End of a track that was gap-filled up to the recording end, if it is one.
inline std::optional<std::int64_t> covered_span_us(const LabelTrack& t) {
  if (t.size() == 0 || t.segments().back().label() != PatternLabel::kNone) return std::nullopt;
  return t.segments().back().end_us();
}

inline void check_spans(const LabelTrack& a, const LabelTrack& b, const std::optional<double>& span_s) {
  if (span_s) {
    const std::int64_t limit = seconds_to_us(*span_s) + 1000;
    for (const LabelTrack* t : {&a, &b}) {
      if (t->size() > 0 && t->segments().back().end_us() > limit) {
        throw Error(Errc::kSpanMismatch, "a track extends past the " + std::to_string(*span_s) + " s recording");
      }
    }
    return;  // an explicit span replaces the end-of-track comparison
  }
  const auto ea = covered_span_us(a), eb = covered_span_us(b);
  if (ea && eb && std::llabs(*ea - *eb) > 1000) {
    throw Error(Errc::kSpanMismatch, "tracks cover different spans (" + std::to_string(*ea / 1e6) + " s vs " +
                                         std::to_string(*eb / 1e6) + " s)");
  }
}

/// Greedy one-to-one matching by descending IoU, pairs below min_iou ignored.
inline std::vector<MatchedPair> match_events(const std::vector<Segment>& ref, const std::vector<Segment>& cand,
                                             double min_iou) {
  std::vector<MatchedPair> all;
  std::size_t j0 = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    // Both lists are sorted and disjoint; skip candidates ending before ref[i].
    while (j0 < cand.size() && cand[j0].end_us() <= ref[i].start_us()) ++j0;
    for (std::size_t j = j0; j < cand.size() && cand[j].start_us() < ref[i].end_us(); ++j) {
      const double v = iou(ref[i], cand[j]);
      if (v >= min_iou) all.push_back({i, j, v});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const MatchedPair& a, const MatchedPair& b) { return a.iou > b.iou; });
  std::vector<bool> used_r(ref.size()), used_c(cand.size());
  std::vector<MatchedPair> out;
  for (const MatchedPair& p : all) {
    if (used_r[p.reference] || used_c[p.candidate]) continue;
    used_r[p.reference] = used_c[p.candidate] = true;
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const MatchedPair& a, const MatchedPair& b) { return a.reference < b.reference; });
  return out;
}

/// No label pair is strictly ordered one way by reference counts and the
/// other way by candidate counts.
inline bool prevalence_order_preserved(const std::array<std::size_t, 4>& ref, const std::array<std::size_t, 4>& cand) {
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      if (ref[a] > ref[b] && cand[a] < cand[b]) return false;
    }
  }
  return true;
}

inline AgreementReport agreement(const LabelTrack& reference, const LabelTrack& candidate,
                                 const AgreementConfig& cfg = {}) {
  check_spans(reference, candidate, cfg.span_s);
  const auto ref = reference.events();
  const auto cand = candidate.events();
  AgreementReport r;
  r.reference_events = ref.size();
  r.candidate_events = cand.size();
  r.pairs = match_events(ref, cand, cfg.min_iou);
  r.matched = r.pairs.size();
  r.missed = ref.size() - r.matched;
  r.spurious = cand.size() - r.matched;
  double err_us = 0.0;
  for (const MatchedPair& p : r.pairs) {
    const Segment& a = ref[p.reference];
    const Segment& b = cand[p.candidate];
    err_us += 0.5 * static_cast<double>(std::llabs(a.start_us() - b.start_us()) + std::llabs(a.end_us() - b.end_us()));
    ++r.confusion[static_cast<std::size_t>(a.label())][static_cast<std::size_t>(b.label())];
  }
  if (r.matched > 0) r.boundary_mae_ms = err_us / static_cast<double>(r.matched) / 1000.0;
  std::array<std::size_t, 4> rc{}, cc{};
  for (const Segment& s : ref) ++rc[static_cast<std::size_t>(s.label())];
  for (const Segment& s : cand) ++cc[static_cast<std::size_t>(s.label())];
  r.prevalence_order_preserved = prevalence_order_preserved(rc, cc);
  return r;
}

struct AurocReport {
  std::map<PatternLabel, std::optional<double>> per_class;
  std::optional<double> macro;  // mean over evaluated classes
  std::vector<std::string> notes;
};

/// Twice the Mann-Whitney U of positives over negatives: each (pos, neg)
/// pair adds 2 when the positive scores higher and 1 on a tie.
inline std::uint64_t twice_mann_whitney_u(const std::vector<double>& scores, const std::vector<bool>& positive) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::uint64_t twice_u = 0, neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (positive[order[j]] ? pos : neg) += 1;
      ++j;
    }
    twice_u += pos * (2 * neg_below + neg);
    neg_below += neg;
    i = j;
  }
  return twice_u;
}

/// One-vs-rest AUROC per class and their macro mean.
inline AurocReport auroc(const std::vector<PatternLabel>& labels, const std::vector<ClassProbabilities>& scores) {
  if (labels.size() != scores.size()) {
    throw Error(Errc::kInvalidArgument, "labels and scores differ in length");
  }
  AurocReport r;
  double sum = 0.0;
  int evaluated = 0;
  for (PatternLabel c : kPatternLabels) {
    std::vector<double> s(labels.size());
    std::vector<bool> pos(labels.size());
    std::uint64_t np = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == PatternLabel::kNone) throw Error(Errc::kInvalidArgument, "None cannot be a class label");
      s[i] = scores[i][c];
      pos[i] = labels[i] == c;
      np += pos[i];
    }
    const std::uint64_t nn = labels.size() - np;
    if (np == 0 || nn == 0) {
      r.per_class[c] = std::nullopt;
      r.notes.push_back(std::string(label_name(c)) + " skipped: no " + (np == 0 ? "positive" : "negative") +
                        " examples");
      continue;
    }
    const double v = static_cast<double>(twice_mann_whitney_u(s, pos)) / static_cast<double>(2 * np * nn);
    r.per_class[c] = v;
    sum += v;
    ++evaluated;
  }
  if (evaluated > 0) {
    r.macro = sum / evaluated;
  } else {
    r.notes.push_back("macro AUROC undefined: no class has both positives and negatives");
  }
  return r;
}

struct AdjustmentRow {
  std::size_t auto_count = 0;
  std::size_t expert_count = 0;
  std::optional<double> mean_dur_auto_s;
  std::optional<double> mean_dur_expert_s;
};

struct AdjustmentOptions {
  double min_iou = 0.3;
  double absorb_fraction = 0.5;  // share of an auto event an expert event must cover to absorb it
  std::optional<double> span_s;
  std::optional<double> review_time_s;
  std::optional<double> manual_baseline_s;
};

struct AdjustmentReport {
  std::map<PatternLabel, AdjustmentRow> rows;  // None, SB, MB, CRS, HS
  std::size_t auto_events = 0;
  std::size_t removed = 0;
  std::size_t merged = 0;
  double pct_removed_or_merged = 0.0;
  std::optional<double> review_time_s;
  std::optional<double> time_reduction_pct;  // only with a manual baseline
};

/// Class-wise comparison of an automatic track with its expert revision.
///
/// An auto event is removed when no expert event matches it at min_iou and
/// none absorbs it. An expert event that absorbs k >= 2 auto events (covering
/// at least absorb_fraction of each) counts k - 1 of them as merged.
inline AdjustmentReport adjustment_report(const LabelTrack& auto_track, const LabelTrack& expert,
                                          const AdjustmentOptions& opts = {}) {
  check_spans(auto_track, expert, opts.span_s);
  AdjustmentReport r;
  // Durations summed in whole microseconds keep the means exact.
  std::map<PatternLabel, std::int64_t> dur_a, dur_e;
  for (PatternLabel l : kAllLabels) r.rows[l];
  for (const Segment& s : auto_track.segments()) {
    ++r.rows[s.label()].auto_count;
    dur_a[s.label()] += s.duration_us();
  }
  for (const Segment& s : expert.segments()) {
    ++r.rows[s.label()].expert_count;
    dur_e[s.label()] += s.duration_us();
  }
  auto mean_s = [](std::int64_t total_us, std::size_t n) {
    return static_cast<double>(total_us) / static_cast<double>(n) / 1e6;
  };
  for (auto& [l, row] : r.rows) {
    if (row.auto_count > 0) row.mean_dur_auto_s = mean_s(dur_a[l], row.auto_count);
    if (row.expert_count > 0) row.mean_dur_expert_s = mean_s(dur_e[l], row.expert_count);
  }

  const auto a = auto_track.events();
  const auto e = expert.events();
  r.auto_events = a.size();
  std::vector<bool> matched(a.size(), false);
  for (const MatchedPair& p : match_events(a, e, opts.min_iou)) matched[p.reference] = true;
  std::vector<std::size_t> absorbed(e.size(), 0);
  std::size_t j0 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    while (j0 < e.size() && e[j0].end_us() <= a[i].start_us()) ++j0;
    std::optional<std::size_t> host;
    std::int64_t best = 0;
    for (std::size_t j = j0; j < e.size() && e[j].start_us() < a[i].end_us(); ++j) {
      const std::int64_t ov = std::min(a[i].end_us(), e[j].end_us()) - std::max(a[i].start_us(), e[j].start_us());
      if (ov > best) best = ov, host = j;
    }
    const bool hosted = host && static_cast<double>(best) >= opts.absorb_fraction * static_cast<double>(a[i].duration_us());
    if (hosted) ++absorbed[*host];
    if (!hosted && !matched[i]) ++r.removed;
  }
  for (std::size_t k : absorbed) r.merged += k >= 2 ? k - 1 : 0;
  if (r.auto_events > 0) {
    r.pct_removed_or_merged = 100.0 * static_cast<double>(r.removed + r.merged) / static_cast<double>(r.auto_events);
  }
  r.review_time_s = opts.review_time_s;
  if (opts.review_time_s && opts.manual_baseline_s && *opts.manual_baseline_s > 0.0) {
    r.time_reduction_pct = 100.0 * (1.0 - *opts.review_time_s / *opts.manual_baseline_s);
  }
  return r;
}

// Serialization. Durations are printed in seconds to the millisecond.

inline nlohmann::json optional_json(const std::optional<double>& v, bool as_seconds = false) {
  if (!v) return nullptr;
  return as_seconds ? round_ms(*v) : *v;
}

inline nlohmann::json to_json(const DistributionReport& r) {
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [l, d] : r.labels) {
    labels[std::string(label_name(l))] = {
        {"count", d.count},
        {"normalized_count", d.normalized_count},
        {"duration", {{"mean_s", round_ms(d.duration.mean_s)}, {"median_s", round_ms(d.duration.median_s)},
                      {"p95_s", round_ms(d.duration.p95_s)}, {"max_s", round_ms(d.duration.max_s)}}}};
  }
  return {{"v", 1}, {"group", group_name(r.group)}, {"total", r.total}, {"empty", r.empty}, {"labels", labels}};
}

inline nlohmann::json to_json(const AgreementReport& r) {
  nlohmann::json confusion = nlohmann::json::object();
  for (PatternLabel a : kPatternLabels) {
    nlohmann::json row = nlohmann::json::object();
    for (PatternLabel b : kPatternLabels) {
      row[std::string(label_name(b))] = r.confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    }
    confusion[std::string(label_name(a))] = row;
  }
  return {{"v", 1},
          {"reference_events", r.reference_events},
          {"candidate_events", r.candidate_events},
          {"matched_events", r.matched},
          {"missed", r.missed},
          {"spurious", r.spurious},
          {"boundary_mae_ms", optional_json(r.boundary_mae_ms)},
          {"confusion", confusion},
          {"prevalence_order_preserved", r.prevalence_order_preserved}};
}

inline nlohmann::json to_json(const AurocReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [l, v] : r.per_class) per[std::string(label_name(l))] = optional_json(v);
  return {{"v", 1}, {"per_class", per}, {"macro", optional_json(r.macro)}, {"notes", r.notes}};
}

inline nlohmann::json to_json(const AdjustmentReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (PatternLabel l : kAllLabels) {
    const AdjustmentRow& row = r.rows.at(l);
    rows.push_back({{"label", label_name(l)},
                    {"auto_count", row.auto_count},
                    {"expert_count", row.expert_count},
                    {"mean_dur_auto_s", optional_json(row.mean_dur_auto_s, true)},
                    {"mean_dur_expert_s", optional_json(row.mean_dur_expert_s, true)}});
  }
  return {{"v", 1},
          {"rows", rows},
          {"auto_events", r.auto_events},
          {"removed", r.removed},
          {"merged", r.merged},
          {"pct_removed_or_merged", r.pct_removed_or_merged},
          {"review_time_s", optional_json(r.review_time_s)},
          {"time_reduction_pct", optional_json(r.time_reduction_pct)}};
}

inline std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

inline std::string csv_seconds(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", round_ms(*v));
  return buf;
}

inline void write_csv(std::ostream& out, const std::vector<DistributionReport>& reports) {
  out << "group,label,count,normalized_count,mean_s,median_s,p95_s,max_s\n";
  for (const DistributionReport& r : reports) {
    for (PatternLabel l : kAllLabels) {
      const LabelDistribution& d = r.labels.at(l);
      out << group_name(r.group) << ',' << label_name(l) << ',' << d.count << ',' << csv_number(d.normalized_count)
          << ',' << csv_seconds(d.duration.mean_s) << ',' << csv_seconds(d.duration.median_s) << ','
          << csv_seconds(d.duration.p95_s) << ',' << csv_seconds(d.duration.max_s) << '\n';
    }
  }
}

inline void write_csv(std::ostream& out, const AgreementReport& r) {
  out << "reference\\candidate";
  for (PatternLabel b : kPatternLabels) out << ',' << label_name(b);
  out << '\n';
  for (PatternLabel a : kPatternLabels) {
    out << label_name(a);
    for (PatternLabel b : kPatternLabels) out << ',' << r.confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    out << '\n';
  }
}

inline void write_csv(std::ostream& out, const AdjustmentReport& r) {
  out << "label,auto_count,expert_count,mean_dur_auto_s,mean_dur_expert_s\n";
  for (PatternLabel l : kAllLabels) {
    const AdjustmentRow& row = r.rows.at(l);
    out << label_name(l) << ',' << row.auto_count << ',' << row.expert_count << ','
        << csv_seconds(row.mean_dur_auto_s) << ',' << csv_seconds(row.mean_dur_expert_s) << '\n';
  }
}

/// Plot-ready duration histogram: one row per (label, bin) with a nonzero
/// count, bins of bin_ms starting at 0.
inline void write_duration_histogram(std::ostream& out, const std::vector<std::pair<ReportGroup, LabelTrack>>& tracks,
                                     int bin_ms = 10) {
  if (bin_ms < 1) throw Error(Errc::kInvalidArgument, "histogram bin must be >= 1 ms");
  out << "group,label,bin_start_s,bin_end_s,count\n";
  const std::int64_t bin_us = std::int64_t{bin_ms} * 1000;
  for (const auto& [group, track] : tracks) {
    std::map<std::pair<PatternLabel, std::int64_t>, std::size_t> bins;
    for (const Segment& s : track.segments()) ++bins[{s.label(), s.duration_us() / bin_us}];
    for (const auto& [key, count] : bins) {
      std::string lo, hi;
      label_detail::append_seconds(lo, key.second * bin_us);
      label_detail::append_seconds(hi, (key.second + 1) * bin_us);
      out << group_name(group) << ',' << label_name(key.first) << ',' << lo << ',' << hi << ',' << count << '\n';
    }
  }
}

}  // namespace bsannot
