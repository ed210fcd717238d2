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

#include <cstdint>
#include <vector>

#include "bsannot/error.hpp"
#include "bsannot/patterns.hpp"

namespace bsannot {

struct PostprocConfig {
  int gap_fill_min_ms = 100;
  int merge_max_gap_ms = 0;
  PatternLabel fill_label = PatternLabel::kNone;

  void validate() const {
    if (gap_fill_min_ms < 0) throw Error(Errc::kInvalidArgument, "gap_fill_min_ms must be >= 0");
    if (merge_max_gap_ms < 0) throw Error(Errc::kInvalidArgument, "merge_max_gap_ms must be >= 0");
  }
};

/// Temporal refinement of a classified track over [0, total_duration_s]:
/// sort, fill every gap longer than gap_fill_min_ms (recording edges
/// included) with fill_label, then merge runs of same-label segments whose
/// gap is at most merge_max_gap_ms. Gap lengths are compared in whole
/// microseconds, so a gap of exactly the threshold is left unfilled.
inline LabelTrack refine(const LabelTrack& track, double total_duration_s,
                         const PostprocConfig& cfg = {}) {
  cfg.validate();
  const std::int64_t total_us = seconds_to_us(total_duration_s);
  for (const Segment& s : track.segments()) {
    if (s.end_us() > total_us) {
      throw Error(Errc::kOutOfRange, "segment ending at " + std::to_string(s.end_s()) +
                                         " s exceeds the recording duration");
    }
  }
  const std::int64_t fill_us = std::int64_t{cfg.gap_fill_min_ms} * 1000;
  const std::int64_t merge_us = std::int64_t{cfg.merge_max_gap_ms} * 1000;

  std::vector<Segment> filled;
  filled.reserve(track.size() * 2 + 1);
  std::int64_t cursor = 0;
  for (const Segment& s : track.segments()) {
    if (s.start_us() - cursor > fill_us) {
      filled.emplace_back(cursor, s.start_us(), cfg.fill_label);
    }
    filled.push_back(s);
    cursor = s.end_us();
  }
  if (total_us - cursor > fill_us) filled.emplace_back(cursor, total_us, cfg.fill_label);

  std::vector<Segment> merged;
  merged.reserve(filled.size());
  for (const Segment& s : filled) {
    if (!merged.empty()) {
      const Segment& last = merged.back();
      if (last.label() == s.label() && s.start_us() - last.end_us() <= merge_us) {
        std::optional<double> conf;
        if (last.confidence() && s.confidence()) {
          conf = std::max(*last.confidence(), *s.confidence());
        }
        merged.back() = Segment(last.start_us(), s.end_us(), s.label(), conf);
        continue;
      }
    }
    merged.push_back(s);
  }
  return LabelTrack(std::move(merged), track.source());
}

inline bool refine_idempotent_check(const LabelTrack& track, double total_duration_s,
                                    const PostprocConfig& cfg = {}) {
  const LabelTrack once = refine(track, total_duration_s, cfg);
  return refine(once, total_duration_s, cfg) == once;
}

}  // namespace bsannot
