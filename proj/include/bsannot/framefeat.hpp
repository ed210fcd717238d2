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
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "bsannot/audio.hpp"
#include "bsannot/dsp.hpp"
#include "bsannot/error.hpp"

namespace bsannot {

inline constexpr std::size_t kMinFrames = 10;

struct FeatureConfig {
  int stft_win_ms = 25;
  int smooth_frames = 21;
  double floor_db = -100.0;
};

/// Per-1 ms frame features of one channel. All series share one length.
struct FrameFeatureTrack {
  std::size_t frame_len_samples = 0;
  int frame_rate = 1000;

  std::vector<double> rms;
  std::vector<double> energy;
  std::vector<double> energy_db;
  std::vector<double> energy_db_smooth;
  std::vector<double> rms_norm;
  std::vector<double> energy_norm;   // dB above baseline_energy
  std::vector<double> energy_delta;  // dB per frame

  double baseline_rms = 0.0;
  double baseline_energy = 0.0;  // dB, median of energy_db_smooth
  bool silent = false;

  std::size_t frames() const { return rms.size(); }
};

struct ThresholdSet {
  double thr_rms = 0.0;
  double thr_energy_delta = 0.0;
  double thr_energy_rel = 0.0;
};

/// Frame RMS and energy over non-overlapping 1 ms frames. The trailing
/// partial frame is discarded.
inline FrameFeatureTrack frame_features(const AudioClip& clip) {
  const std::size_t n = clip.frame_len();
  const std::size_t frames = n == 0 ? 0 : clip.size() / n;
  if (frames < kMinFrames) {
    throw Error(Errc::kTooShort, "clip shorter than 10 ms");
  }
  FrameFeatureTrack track;
  track.frame_len_samples = n;
  track.rms.resize(frames);
  track.energy.resize(frames);
  const auto x = clip.samples();
  for (std::size_t i = 0; i < frames; ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double s = x[i * n + k];
      sum += s * s;
    }
    track.energy[i] = sum;
    track.rms[i] = std::sqrt(sum / static_cast<double>(n));
  }
  return track;
}

struct EnergyProfile {
  std::vector<double> energy_db;
  std::vector<double> energy_db_smooth;
  bool silent = false;
};

/// Frame-level dB energy profile on the 1 ms grid.
///
/// Frame i is analysed with a Hann window of stft_win_ms that ends at the end
/// of frame i (zero padded before the clip start), so the profile at i only
/// reflects audio up to that frame. Each bin is converted to dB against the
/// largest bin magnitude of the whole clip and floored at floor_db; the frame
/// value is the mean over bins, then a centered moving average is applied.
inline EnergyProfile energy_db_profile(const AudioClip& clip, const FeatureConfig& cfg = {}) {
  const std::size_t hop = clip.frame_len();
  const auto win = static_cast<std::size_t>(
      std::lround(cfg.stft_win_ms * clip.sample_rate() / 1000.0));
  if (hop == 0 || win < 2 || clip.size() < win) {
    throw Error(Errc::kTooShort, "clip shorter than one STFT window");
  }
  const std::size_t frames = clip.size() / hop;
  const std::size_t nfft = std::max<std::size_t>(4, dsp::next_pow2(win));
  const auto window = dsp::hann(win);
  dsp::RealFft fft(nfft);
  const std::size_t bins = fft.bins();
  const auto x = clip.samples();

  std::vector<double> frame(nfft, 0.0);
  std::vector<double> power(bins);
  auto analyse = [&](std::size_t i) {
    const auto end = static_cast<std::ptrdiff_t>((i + 1) * hop);
    const auto start = end - static_cast<std::ptrdiff_t>(win);
    for (std::size_t k = 0; k < win; ++k) {
      const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(k);
      frame[k] = idx >= 0 ? x[static_cast<std::size_t>(idx)] * window[k] : 0.0;
    }
    fft.power(frame, power);
  };

  // Pass 1: per-frame sum of log10 power, min and max bin power. The log of
  // a product is accumulated via frexp to avoid one log call per bin.
  std::vector<double> sum_log10(frames);
  std::vector<double> min_power(frames);
  double max_power = 0.0;
  const double log10_2 = std::log10(2.0);
  for (std::size_t i = 0; i < frames; ++i) {
    analyse(i);
    double mant = 1.0;
    long exp2 = 0;
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < bins; ++k) {
      const double p = power[k];
      lo = std::min(lo, p);
      max_power = std::max(max_power, p);
      int e = 0;
      mant *= std::frexp(p, &e);
      exp2 += e;
      if ((k & 7u) == 7u) {
        mant = std::frexp(mant, &e);
        exp2 += e;
      }
    }
    min_power[i] = lo;
    sum_log10[i] = lo > 0.0 ? std::log10(mant) + static_cast<double>(exp2) * log10_2 : 0.0;
  }

  EnergyProfile profile;
  profile.energy_db.assign(frames, cfg.floor_db);
  if (max_power <= 0.0) {
    profile.silent = true;
    profile.energy_db_smooth = profile.energy_db;
    return profile;
  }

  // Pass 2: 10 log10(p / max) = 20 log10(|X| / max|X|). Frames holding a bin
  // below the floor are re-analysed with explicit per-bin clamping.
  const double ref_db = 10.0 * std::log10(max_power);
  const double floor_power = max_power * std::pow(10.0, cfg.floor_db / 10.0);
  const auto nb = static_cast<double>(bins);
  for (std::size_t i = 0; i < frames; ++i) {
    if (min_power[i] >= floor_power && min_power[i] > 0.0) {
      profile.energy_db[i] = std::min(0.0, 10.0 * sum_log10[i] / nb - ref_db);
      continue;
    }
    analyse(i);
    double sum = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      sum += power[k] > floor_power ? 10.0 * std::log10(power[k]) - ref_db : cfg.floor_db;
    }
    profile.energy_db[i] = std::min(0.0, sum / nb);
  }
  profile.energy_db_smooth = dsp::moving_average(profile.energy_db, cfg.smooth_frames);
  return profile;
}

/// Fills the baselines and the normalized series. Requires rms/energy and the
/// smoothed dB profile to be populated.
inline FrameFeatureTrack normalize(FrameFeatureTrack track) {
  const std::size_t n = track.frames();
  if (track.energy_db_smooth.size() != n) {
    throw Error(Errc::kInvalidArgument, "energy profile and frame features differ in length");
  }
  track.baseline_energy = dsp::lower_median(track.energy_db_smooth);

  // RMS baseline: mean RMS over the frames at or below the energy baseline.
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (track.energy_db_smooth[i] <= track.baseline_energy) {
      sum += track.rms[i];
      ++count;
    }
  }
  track.baseline_rms = count > 0 ? sum / static_cast<double>(count) : 0.0;
  if (!(track.baseline_rms > 0.0)) {
    throw Error(Errc::kSilentBaseline, "silent baseline");
  }

  track.rms_norm.resize(n);
  track.energy_norm.resize(n);
  track.energy_delta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    track.rms_norm[i] = track.rms[i] / track.baseline_rms;
    track.energy_norm[i] = track.energy_db_smooth[i] - track.baseline_energy;
    track.energy_delta[i] =
        i == 0 ? 0.0 : track.energy_db_smooth[i] - track.energy_db_smooth[i - 1];
  }
  return track;
}

/// frame_features + energy_db_profile + normalize.
inline FrameFeatureTrack analyze(const AudioClip& clip, const FeatureConfig& cfg = {}) {
  FrameFeatureTrack track = frame_features(clip);
  EnergyProfile profile = energy_db_profile(clip, cfg);
  track.energy_db = std::move(profile.energy_db);
  track.energy_db_smooth = std::move(profile.energy_db_smooth);
  track.silent = profile.silent;
  return normalize(std::move(track));
}

inline ThresholdSet thresholds(const FrameFeatureTrack& track) {
  if (track.rms_norm.empty()) {
    throw Error(Errc::kInvalidArgument, "thresholds need a normalized track");
  }
  return {dsp::lower_median(track.rms_norm), dsp::lower_median(track.energy_delta),
          dsp::lower_median(track.energy_norm)};
}

/// Thresholds over the concatenation of several channels (per-subject pooling).
inline ThresholdSet pooled_thresholds(std::span<const FrameFeatureTrack> tracks) {
  std::vector<double> r, d, e;
  for (const auto& t : tracks) {
    r.insert(r.end(), t.rms_norm.begin(), t.rms_norm.end());
    d.insert(d.end(), t.energy_delta.begin(), t.energy_delta.end());
    e.insert(e.end(), t.energy_norm.begin(), t.energy_norm.end());
  }
  if (r.empty()) throw Error(Errc::kInvalidArgument, "thresholds need a normalized track");
  return {dsp::lower_median(std::move(r)), dsp::lower_median(std::move(d)),
          dsp::lower_median(std::move(e))};
}

/// One row per frame, for plotting the feature curves.
inline void write_feature_csv(std::ostream& out, const FrameFeatureTrack& track) {
  out << "index,time_s,rms,energy,energy_db_smooth,rms_norm,energy_norm,energy_delta\n";
  const auto old_prec = out.precision(10);
  for (std::size_t i = 0; i < track.frames(); ++i) {
    out << i << ',' << static_cast<double>(i) / track.frame_rate << ',' << track.rms[i] << ','
        << track.energy[i] << ',' << track.energy_db_smooth[i] << ',' << track.rms_norm[i]
        << ',' << track.energy_norm[i] << ',' << track.energy_delta[i] << '\n';
  }
  out.precision(old_prec);
}

}  // namespace bsannot
