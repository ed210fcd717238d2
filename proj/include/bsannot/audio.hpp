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
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bsannot/error.hpp"

namespace bsannot {

inline constexpr int kMinSampleRate = 2000;

enum class Quadrant { kRUQ = 0, kLUQ = 1, kRLQ = 2, kLLQ = 3 };

inline constexpr Quadrant kQuadrantOrder[] = {Quadrant::kRUQ, Quadrant::kLUQ,
                                              Quadrant::kRLQ, Quadrant::kLLQ};

inline std::string_view quadrant_name(Quadrant q) {
  switch (q) {
    case Quadrant::kRUQ: return "RUQ";
    case Quadrant::kLUQ: return "LUQ";
    case Quadrant::kRLQ: return "RLQ";
    case Quadrant::kLLQ: return "LLQ";
  }
  return "?";
}

inline Quadrant parse_quadrant(std::string_view name) {
  for (Quadrant q : kQuadrantOrder) {
    if (quadrant_name(q) == name) return q;
  }
  // Generic channel indices "0".."3" map positionally.
  if (name.size() == 1 && name[0] >= '0' && name[0] <= '3') {
    return kQuadrantOrder[name[0] - '0'];
  }
  throw Error(Errc::kInvalidArgument,
              "unknown quadrant '" + std::string(name) + "'");
}

enum class Cohort { kHealthy, kPatient, kUnknown };

inline std::string_view cohort_name(Cohort c) {
  switch (c) {
    case Cohort::kHealthy: return "healthy";
    case Cohort::kPatient: return "patient";
    case Cohort::kUnknown: return "unknown";
  }
  return "unknown";
}

inline Cohort parse_cohort(std::string_view name) {
  if (name == "healthy") return Cohort::kHealthy;
  if (name == "patient") return Cohort::kPatient;
  if (name == "unknown") return Cohort::kUnknown;
  throw Error(Errc::kInvalidArgument, "unknown cohort '" + std::string(name) + "'");
}

// Sample index of time t on a grid of rate fs. The small bias keeps times
// that sit exactly on the grid (k / fs) from rounding down to k - 1.
inline std::size_t time_to_index(double t, int fs) {
  return static_cast<std::size_t>(std::floor(t * fs + 1e-7));
}

/// Mono waveform with samples in [-1, 1]. Immutable; copies share storage.
class AudioClip {
 public:
  AudioClip() : samples_(std::make_shared<const std::vector<double>>()) {}

  AudioClip(std::vector<double> samples, int sample_rate)
      : sample_rate_(sample_rate) {
    if (sample_rate < kMinSampleRate) {
      throw Error(Errc::kInvalidArgument,
                  "sample rate " + std::to_string(sample_rate) +
                      " Hz is below the 2000 Hz minimum");
    }
    for (double s : samples) {
      if (!(s >= -1.0 && s <= 1.0)) {
        throw Error(Errc::kOutOfRange, "sample outside [-1, 1]");
      }
    }
    samples_ = std::make_shared<const std::vector<double>>(std::move(samples));
  }

  std::span<const double> samples() const { return *samples_; }
  std::size_t size() const { return samples_->size(); }
  bool empty() const { return samples_->empty(); }
  int sample_rate() const { return sample_rate_; }
  double duration_s() const {
    return sample_rate_ > 0 ? static_cast<double>(size()) / sample_rate_ : 0.0;
  }

  // Samples per 1 ms detection frame.
  std::size_t frame_len() const {
    return static_cast<std::size_t>(std::lround(sample_rate_ / 1000.0));
  }

  bool operator==(const AudioClip& other) const {
    return sample_rate_ == other.sample_rate_ &&
           (samples_ == other.samples_ || *samples_ == *other.samples_);
  }

 private:
  std::shared_ptr<const std::vector<double>> samples_;
  int sample_rate_ = 0;
};

/// Samples in [floor(start_s * fs), floor(end_s * fs)).
inline AudioClip slice(const AudioClip& clip, double start_s, double end_s) {
  const double eps = 0.5 / clip.sample_rate();
  if (!(start_s >= 0.0) || !(start_s < end_s) ||
      end_s > clip.duration_s() + eps) {
    throw Error(Errc::kOutOfRange, "slice bounds [" + std::to_string(start_s) +
                                       ", " + std::to_string(end_s) +
                                       ") outside clip of " +
                                       std::to_string(clip.duration_s()) + " s");
  }
  const std::size_t lo = std::min(time_to_index(start_s, clip.sample_rate()), clip.size());
  const std::size_t hi = std::min(time_to_index(end_s, clip.sample_rate()), clip.size());
  auto s = clip.samples();
  return AudioClip(std::vector<double>(s.begin() + lo, s.begin() + hi),
                   clip.sample_rate());
}

/// Multiplies every sample by gain; the result must stay within [-1, 1].
inline AudioClip scaled(const AudioClip& clip, double gain) {
  std::vector<double> out(clip.samples().begin(), clip.samples().end());
  for (double& s : out) s *= gain;
  return AudioClip(std::move(out), clip.sample_rate());
}

struct SubjectMeta {
  Cohort cohort = Cohort::kUnknown;
  std::string subject_id;
};

/// One clip per abdominal quadrant, all at the same sample rate.
class Recording {
 public:
  Recording() = default;

  explicit Recording(std::map<Quadrant, AudioClip> channels,
                     std::optional<SubjectMeta> meta = std::nullopt)
      : channels_(std::move(channels)), meta_(std::move(meta)) {
    if (channels_.empty()) {
      throw Error(Errc::kInvalidArgument, "recording has no channels");
    }
    const int fs = channels_.begin()->second.sample_rate();
    for (const auto& [q, clip] : channels_) {
      if (clip.sample_rate() != fs) {
        throw Error(Errc::kInvalidArgument, "channels disagree on sample rate");
      }
    }
  }

  const std::map<Quadrant, AudioClip>& channels() const { return channels_; }
  const AudioClip& channel(Quadrant q) const {
    auto it = channels_.find(q);
    if (it == channels_.end()) {
      throw Error(Errc::kNotFound,
                  "recording has no " + std::string(quadrant_name(q)) + " channel");
    }
    return it->second;
  }
  int sample_rate() const {
    return channels_.empty() ? 0 : channels_.begin()->second.sample_rate();
  }
  const std::optional<SubjectMeta>& meta() const { return meta_; }

 private:
  std::map<Quadrant, AudioClip> channels_;
  std::optional<SubjectMeta> meta_;
};

}  // namespace bsannot
