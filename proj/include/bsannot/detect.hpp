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

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bsannot/audio.hpp"
#include "bsannot/error.hpp"
#include "bsannot/framefeat.hpp"

namespace bsannot {

/// A detected event on the 1 ms frame grid: frames [first_frame, end_frame).
struct EventInterval {
  double start_s = 0.0;
  double end_s = 0.0;
  double peak_energy_norm = 0.0;  // dB above baseline
  std::size_t frame_span = 0;

  bool operator==(const EventInterval&) const = default;
};

struct DetectorConfig {
  int min_event_ms = 5;
  int hangover_frames = 3;
  // Offsets added to the median thresholds. Zero margins and zero bridging
  // give the bare median rule, which fires on roughly a quarter of the frames
  // of a stationary noise floor.
  double onset_rms_margin_db = 8.0;   // multiplies thr_rms by 10^(m/20)
  double energy_margin_db = 1.5;      // added to thr_energy_rel
  int bridge_gap_ms = 250;            // joins events closer than this

  void validate() const {
    if (min_event_ms < 1) throw Error(Errc::kInvalidArgument, "min_event_ms must be >= 1");
    if (hangover_frames < 0) throw Error(Errc::kInvalidArgument, "hangover_frames must be >= 0");
    if (bridge_gap_ms < 0) throw Error(Errc::kInvalidArgument, "bridge_gap_ms must be >= 0");
    if (!std::isfinite(onset_rms_margin_db) || !std::isfinite(energy_margin_db)) {
      throw Error(Errc::kInvalidArgument, "detector margins must be finite");
    }
  }
};

/// Onset/sustain/offset state machine over one channel.
///
///   IDLE -> ACTIVE   rms_norm > T_rms and energy_delta > T_delta
///   ACTIVE persists  while energy_norm > T_rel
///   ACTIVE -> IDLE   once rms_norm <= T_rms, energy_delta <= T_delta and
///                    energy_norm <= T_rel hold on max(1, hangover) consecutive
///                    frames; the event ends before the first of them.
///
/// The onset frame is part of the event. Events shorter than min_event_ms are
/// dropped, then events separated by less than bridge_gap_ms are joined.
inline std::vector<EventInterval> detect_events(const FrameFeatureTrack& track,
                                                const ThresholdSet& thr,
                                                const DetectorConfig& cfg = {}) {
  cfg.validate();
  const std::size_t n = track.frames();
  if (track.rms_norm.size() != n || track.energy_norm.size() != n ||
      track.energy_delta.size() != n) {
    throw Error(Errc::kInvalidArgument, "detect_events needs a normalized track");
  }
  const double t_rms = thr.thr_rms * std::pow(10.0, cfg.onset_rms_margin_db / 20.0);
  const double t_delta = thr.thr_energy_delta;
  const double t_rel = thr.thr_energy_rel + cfg.energy_margin_db;
  const std::size_t need = static_cast<std::size_t>(std::max(1, cfg.hangover_frames));

  struct Span {
    std::size_t begin, end;
  };
  std::vector<Span> spans;
  bool active = false;
  std::size_t begin = 0;
  std::size_t below = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active) {
      if (track.rms_norm[i] > t_rms && track.energy_delta[i] > t_delta) {
        active = true;
        begin = i;
        below = 0;
      }
      continue;
    }
    const bool all_below = track.rms_norm[i] <= t_rms && track.energy_delta[i] <= t_delta &&
                           track.energy_norm[i] <= t_rel;
    below = all_below ? below + 1 : 0;
    if (below >= need) {
      spans.push_back({begin, i + 1 - below});
      active = false;
    }
  }
  if (active) spans.push_back({begin, n});

  const auto min_frames = static_cast<std::size_t>(cfg.min_event_ms);
  const auto bridge = static_cast<std::size_t>(cfg.bridge_gap_ms);
  std::vector<Span> kept;
  for (const Span& s : spans) {
    if (s.end - s.begin < min_frames) continue;
    if (!kept.empty() && s.begin - kept.back().end < bridge) {
      kept.back().end = s.end;
    } else {
      kept.push_back(s);
    }
  }

  std::vector<EventInterval> events;
  events.reserve(kept.size());
  const double rate = track.frame_rate;
  for (const Span& s : kept) {
    double peak = track.energy_norm[s.begin];
    for (std::size_t i = s.begin; i < s.end; ++i) peak = std::max(peak, track.energy_norm[i]);
    events.push_back({static_cast<double>(s.begin) / rate, static_cast<double>(s.end) / rate,
                      peak, s.end - s.begin});
  }
  return events;
}

inline std::vector<EventInterval> detect_clip(const AudioClip& clip,
                                              const DetectorConfig& cfg = {},
                                              const FeatureConfig& feat = {}) {
  const FrameFeatureTrack track = analyze(clip, feat);
  return detect_events(track, thresholds(track), cfg);
}

/// Outcome for one channel: either events or the error that stopped it.
struct ChannelEvents {
  std::vector<EventInterval> events;
  std::optional<Errc> error;
  std::string message;

  bool ok() const { return !error.has_value(); }
};

/// Runs detection independently per channel. A failing channel reports its
/// error with quadrant context and does not affect the others.
inline std::map<Quadrant, ChannelEvents> detect_recording(const Recording& rec,
                                                          const DetectorConfig& cfg = {},
                                                          const FeatureConfig& feat = {}) {
  std::map<Quadrant, ChannelEvents> out;
  for (const auto& [q, clip] : rec.channels()) {
    ChannelEvents result;
    try {
      result.events = detect_clip(clip, cfg, feat);
    } catch (const Error& e) {
      result.error = e.code();
      result.message = std::string(quadrant_name(q)) + ": " + e.what();
    }
    out.emplace(q, std::move(result));
  }
  return out;
}

}  // namespace bsannot
