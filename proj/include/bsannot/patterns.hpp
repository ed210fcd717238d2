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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "bsannot/detect.hpp"
#include "bsannot/error.hpp"

namespace bsannot {

/// Closed label set. The four BS patterns are listed first, in tie-break order.
enum class PatternLabel { kSB = 0, kMB = 1, kCRS = 2, kHS = 3, kNone = 4 };

inline constexpr std::array<PatternLabel, 4> kPatternLabels = {
    PatternLabel::kSB, PatternLabel::kMB, PatternLabel::kCRS, PatternLabel::kHS};
inline constexpr std::array<PatternLabel, 5> kAllLabels = {
    PatternLabel::kNone, PatternLabel::kSB, PatternLabel::kMB, PatternLabel::kCRS,
    PatternLabel::kHS};

inline std::string_view label_name(PatternLabel label) {
  switch (label) {
    case PatternLabel::kSB: return "SB";
    case PatternLabel::kMB: return "MB";
    case PatternLabel::kCRS: return "CRS";
    case PatternLabel::kHS: return "HS";
    case PatternLabel::kNone: return "None";
  }
  return "?";
}

inline std::optional<PatternLabel> try_parse_label(std::string_view name) {
  for (PatternLabel l : kAllLabels) {
    if (label_name(l) == name) return l;
  }
  return std::nullopt;
}

inline PatternLabel parse_label(std::string_view name) {
  if (auto l = try_parse_label(name)) return *l;
  throw Error(Errc::kUnknownLabel, "unknown label '" + std::string(name) + "'");
}

enum class PatternStructure { kImpulsive, kBurstGroup, kContinuous, kHarmonic };

struct PatternSpec {
  PatternLabel label;
  int min_ms;
  int max_ms;
  PatternStructure structure;

  double centroid_ms() const { return 0.5 * (min_ms + max_ms); }
};

inline constexpr std::array<PatternSpec, 4> kPatternSpecs = {{
    {PatternLabel::kSB, 10, 30, PatternStructure::kImpulsive},
    {PatternLabel::kMB, 40, 1500, PatternStructure::kBurstGroup},
    {PatternLabel::kCRS, 200, 4000, PatternStructure::kContinuous},
    {PatternLabel::kHS, 50, 1500, PatternStructure::kHarmonic},
}};

inline const PatternSpec& pattern_spec(PatternLabel label) {
  if (label == PatternLabel::kNone) {
    throw Error(Errc::kInvalidArgument, "None has no duration spec");
  }
  return kPatternSpecs[static_cast<std::size_t>(label)];
}

inline std::int64_t seconds_to_us(double s) { return std::llround(s * 1e6); }

/// Labeled time interval with microsecond resolution.
class Segment {
 public:
  Segment() = default;

  Segment(std::int64_t start_us, std::int64_t end_us, PatternLabel label,
          std::optional<double> confidence = std::nullopt)
      : start_us_(start_us), end_us_(end_us), label_(label), confidence_(confidence) {
    if (end_us_ <= start_us_) {
      throw Error(Errc::kNonPositiveDuration, "segment end must be after its start");
    }
    if (confidence_ && !(*confidence_ >= 0.0 && *confidence_ <= 1.0)) {
      throw Error(Errc::kOutOfRange, "confidence outside [0, 1]");
    }
  }

  static Segment from_seconds(double start_s, double end_s, PatternLabel label,
                              std::optional<double> confidence = std::nullopt) {
    return Segment(seconds_to_us(start_s), seconds_to_us(end_s), label, confidence);
  }

  std::int64_t start_us() const { return start_us_; }
  std::int64_t end_us() const { return end_us_; }
  std::int64_t duration_us() const { return end_us_ - start_us_; }
  double start_s() const { return static_cast<double>(start_us_) / 1e6; }
  double end_s() const { return static_cast<double>(end_us_) / 1e6; }
  double duration_s() const { return static_cast<double>(duration_us()) / 1e6; }
  PatternLabel label() const { return label_; }
  const std::optional<double>& confidence() const { return confidence_; }

  Segment with_label(PatternLabel label) const {
    return Segment(start_us_, end_us_, label, confidence_);
  }

  bool operator==(const Segment&) const = default;

 private:
  std::int64_t start_us_ = 0;
  std::int64_t end_us_ = 1;
  PatternLabel label_ = PatternLabel::kNone;
  std::optional<double> confidence_;
};

enum class TrackSource { kManual, kPredicted, kAuto, kExpertAdjusted };

inline std::string_view source_name(TrackSource s) {
  switch (s) {
    case TrackSource::kManual: return "manual";
    case TrackSource::kPredicted: return "predicted";
    case TrackSource::kAuto: return "auto";
    case TrackSource::kExpertAdjusted: return "expert-adjusted";
  }
  return "?";
}

/// Ordered, non-overlapping segments. Touching segments are allowed.
class LabelTrack {
 public:
  LabelTrack() = default;

  explicit LabelTrack(std::vector<Segment> segments, TrackSource source = TrackSource::kManual)
      : segments_(std::move(segments)), source_(source) {
    std::stable_sort(segments_.begin(), segments_.end(),
                     [](const Segment& a, const Segment& b) { return a.start_us() < b.start_us(); });
    for (std::size_t i = 1; i < segments_.size(); ++i) {
      if (segments_[i].start_us() < segments_[i - 1].end_us()) {
        throw Error(Errc::kOverlap, "segments overlap at " +
                                        std::to_string(segments_[i].start_s()) + " s");
      }
    }
  }

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  TrackSource source() const { return source_; }
  const Segment& operator[](std::size_t i) const { return segments_[i]; }

  /// End of the last segment, 0 for an empty track.
  std::int64_t span_us() const { return segments_.empty() ? 0 : segments_.back().end_us(); }

  std::size_t count(PatternLabel label) const {
    return static_cast<std::size_t>(std::count_if(
        segments_.begin(), segments_.end(), [&](const Segment& s) { return s.label() == label; }));
  }

  /// Segments other than None.
  std::vector<Segment> events() const {
    std::vector<Segment> out;
    for (const auto& s : segments_) {
      if (s.label() != PatternLabel::kNone) out.push_back(s);
    }
    return out;
  }

  bool operator==(const LabelTrack& other) const { return segments_ == other.segments_; }

 private:
  std::vector<Segment> segments_;
  TrackSource source_ = TrackSource::kManual;
};

namespace label_detail {

// Decimal seconds with '.' separator, at most microsecond precision kept.
inline std::optional<std::int64_t> parse_seconds(std::string_view text) {
  if (text.empty()) return std::nullopt;
  for (char c : text) {
    if (!((c >= '0' && c <= '9') || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E')) {
      return std::nullopt;
    }
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return seconds_to_us(v);
}

inline void append_seconds(std::string& out, std::int64_t us) {
  if (us < 0) {
    out.push_back('-');
    us = -us;
  }
  out += std::to_string(us / 1'000'000);
  out.push_back('.');
  std::string frac = std::to_string(us % 1'000'000);
  out.append(6 - frac.size(), '0');
  out += frac;
}

}  // namespace label_detail

/// Parses Audacity label-track text: one "start<TAB>end<TAB>label" per line.
inline LabelTrack parse_label_track(std::string_view text,
                                    TrackSource source = TrackSource::kManual) {
  struct Parsed {
    Segment seg;
    std::size_t line;
  };
  std::vector<Parsed> parsed;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const std::string where = "line " + std::to_string(line_no);
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
      throw Error(Errc::kMalformedLine, where + ": expected start<TAB>end<TAB>label");
    }
    const auto start = label_detail::parse_seconds(line.substr(0, t1));
    const auto end = label_detail::parse_seconds(line.substr(t1 + 1, t2 - t1 - 1));
    if (!start || !end) throw Error(Errc::kMalformedLine, where + ": bad time value");
    if (*start < 0) throw Error(Errc::kOutOfRange, where + ": negative start time");
    const auto label = try_parse_label(line.substr(t2 + 1));
    if (!label) {
      throw Error(Errc::kUnknownLabel,
                  where + ": unknown label '" + std::string(line.substr(t2 + 1)) + "'");
    }
    if (*end <= *start) throw Error(Errc::kNonPositiveDuration, where + ": end <= start");
    parsed.push_back({Segment(*start, *end, *label), line_no});
  }

  std::stable_sort(parsed.begin(), parsed.end(), [](const Parsed& a, const Parsed& b) {
    return a.seg.start_us() < b.seg.start_us();
  });
  std::vector<Segment> segments;
  segments.reserve(parsed.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    if (i > 0 && parsed[i].seg.start_us() < parsed[i - 1].seg.end_us()) {
      throw Error(Errc::kOverlap, "line " + std::to_string(parsed[i].line) +
                                      ": overlaps line " + std::to_string(parsed[i - 1].line));
    }
    segments.push_back(parsed[i].seg);
  }
  return LabelTrack(std::move(segments), source);
}

/// Six-decimal seconds, tab separated, one newline-terminated line per segment.
inline std::string write_label_track(const LabelTrack& track) {
  std::string out;
  for (const Segment& s : track.segments()) {
    label_detail::append_seconds(out, s.start_us());
    out.push_back('\t');
    label_detail::append_seconds(out, s.end_us());
    out.push_back('\t');
    out += label_name(s.label());
    out.push_back('\n');
  }
  return out;
}

struct DurationWarning {
  std::size_t index;
  PatternLabel label;
  double duration_ms;
  std::string message;
};

/// Flags segments whose duration is outside the nominal range of their
/// pattern. None segments are exempt.
inline std::vector<DurationWarning> validate_durations(const LabelTrack& track) {
  std::vector<DurationWarning> warnings;
  for (std::size_t i = 0; i < track.size(); ++i) {
    const Segment& s = track[i];
    if (s.label() == PatternLabel::kNone) continue;
    const PatternSpec& spec = pattern_spec(s.label());
    const double ms = static_cast<double>(s.duration_us()) / 1000.0;
    const std::string name(label_name(s.label()));
    if (ms > spec.max_ms) {
      warnings.push_back({i, s.label(), ms, name + " exceeds " + std::to_string(spec.max_ms) + " ms"});
    } else if (ms < spec.min_ms) {
      warnings.push_back(
          {i, s.label(), ms, name + " shorter than " + std::to_string(spec.min_ms) + " ms"});
    }
  }
  return warnings;
}

/// Detected events before classification, in Audacity form with the label
/// "event". This text is for viewing only; it is not a parseable LabelTrack.
inline std::string write_event_labels(const std::vector<EventInterval>& events) {
  std::string out;
  for (const auto& e : events) {
    label_detail::append_seconds(out, seconds_to_us(e.start_s));
    out.push_back('\t');
    label_detail::append_seconds(out, seconds_to_us(e.end_s));
    out += "\tevent\n";
  }
  return out;
}

}  // namespace bsannot
