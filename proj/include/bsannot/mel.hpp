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
#include <vector>

#include "bsannot/audio.hpp"
#include "bsannot/dsp.hpp"
#include "bsannot/error.hpp"

namespace bsannot {

struct MelConfig {
  int n_mels = 128;
  int win_ms = 25;
  int hop_ms = 10;
  double fmin_hz = 0.0;
  double fmax_hz = 0.0;  // 0 means fs / 2

  bool operator==(const MelConfig&) const = default;
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Row-major [frame][band] log-mel power in dB.
struct LogMel {
  std::size_t n_frames = 0;
  std::size_t n_bands = 0;
  std::size_t valid_frames = 0;  // frames that cover real audio (rest is padding)
  std::vector<double> db;
  std::vector<double> band_hz;  // band centre frequencies

  double at(std::size_t frame, std::size_t band) const { return db[frame * n_bands + band]; }
};

/// Triangular HTK-mel filters on the FFT bin grid. A filter narrower than a
/// bin takes the bin nearest its centre so that no band is empty.
class MelFilterbank {
 public:
  MelFilterbank(const MelConfig& cfg, int fs, std::size_t nfft) : bins_(nfft / 2 + 1) {
    const double fmax = cfg.fmax_hz > 0.0 ? cfg.fmax_hz : fs / 2.0;
    if (cfg.n_mels < 1 || !(fmax > cfg.fmin_hz) || fmax > fs / 2.0) {
      throw Error(Errc::kInvalidArgument, "bad mel configuration");
    }
    const double lo = hz_to_mel(cfg.fmin_hz);
    const double hi = hz_to_mel(fmax);
    std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(edges.size() - 1));
    }
    const double bin_hz = static_cast<double>(fs) / static_cast<double>(nfft);
    bands_.resize(static_cast<std::size_t>(cfg.n_mels));
    for (std::size_t m = 0; m < bands_.size(); ++m) {
      const double l = edges[m], c = edges[m + 1], r = edges[m + 2];
      Band& band = bands_[m];
      band.center_hz = c;
      for (std::size_t k = 0; k < bins_; ++k) {
        const double f = static_cast<double>(k) * bin_hz;
        double w = 0.0;
        if (f > l && f <= c) w = (f - l) / (c - l);
        else if (f > c && f < r) w = (r - f) / (r - c);
        if (w <= 0.0) continue;
        if (band.weights.empty()) band.first = k;
        band.weights.resize(k - band.first + 1, 0.0);
        band.weights.back() = w;
      }
      if (band.weights.empty()) {
        band.first = std::min(bins_ - 1, static_cast<std::size_t>(std::lround(c / bin_hz)));
        band.weights = {1.0};
      }
    }
  }

  std::size_t bands() const { return bands_.size(); }

  std::vector<double> centers() const {
    std::vector<double> out;
    for (const Band& b : bands_) out.push_back(b.center_hz);
    return out;
  }

  // Dense weight of bin k in band m.
  double weight(std::size_t m, std::size_t k) const {
    const Band& b = bands_[m];
    return k >= b.first && k - b.first < b.weights.size() ? b.weights[k - b.first] : 0.0;
  }

  void apply(const std::vector<double>& power, double* out) const {
    for (std::size_t m = 0; m < bands_.size(); ++m) {
      const Band& b = bands_[m];
      double s = 0.0;
      for (std::size_t j = 0; j < b.weights.size(); ++j) s += b.weights[j] * power[b.first + j];
      out[m] = s;
    }
  }

 private:
  struct Band {
    std::size_t first = 0;
    std::vector<double> weights;
    double center_hz = 0.0;
  };
  std::size_t bins_;
  std::vector<Band> bands_;
};

inline std::size_t mel_frames_for(std::size_t n_samples, std::size_t win, std::size_t hop) {
  return n_samples < win ? 0 : 1 + (n_samples - win) / hop;
}

/// Log-mel spectrogram with n_frames = 1 + floor((len - win) / hop).
///
/// min_frames pads the signal with zeros on the right until at least that many
/// frames exist; max_frames truncates. valid_frames counts frames computed
/// from real samples (at least 1 for any non-empty input).
inline LogMel log_mel(const AudioClip& clip, const MelConfig& cfg = {}, std::size_t min_frames = 0,
                      std::size_t max_frames = 0) {
  const int fs = clip.sample_rate();
  const auto win = static_cast<std::size_t>(std::lround(cfg.win_ms * fs / 1000.0));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_ms * fs / 1000.0));
  if (win < 2 || hop < 1) throw Error(Errc::kInvalidArgument, "bad mel window");
  if (clip.empty()) throw Error(Errc::kEmptySegment, "log-mel of an empty clip");

  const std::size_t natural = mel_frames_for(clip.size(), win, hop);
  std::size_t n_frames = std::max<std::size_t>(natural, min_frames);
  if (n_frames == 0) n_frames = 1;  // short clip: one zero-padded frame
  if (max_frames > 0) n_frames = std::min(n_frames, max_frames);

  const std::size_t nfft = dsp::next_pow2(win);
  dsp::RealFft fft(std::max<std::size_t>(4, nfft));
  const MelFilterbank bank(cfg, fs, fft.size());
  const auto window = dsp::hann(win);
  const auto x = clip.samples();

  LogMel out;
  out.n_frames = n_frames;
  out.n_bands = bank.bands();
  out.valid_frames = std::min(n_frames, std::max<std::size_t>(1, natural));
  out.band_hz = bank.centers();
  out.db.resize(n_frames * out.n_bands);

  std::vector<double> frame(fft.size(), 0.0);
  std::vector<double> power(fft.bins());
  std::vector<double> mel(out.n_bands);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t start = f * hop;
    for (std::size_t k = 0; k < win; ++k) {
      frame[k] = start + k < x.size() ? x[start + k] * window[k] : 0.0;
    }
    fft.power(frame, power);
    bank.apply(power, mel.data());
    for (std::size_t m = 0; m < out.n_bands; ++m) {
      out.db[f * out.n_bands + m] = 10.0 * std::log10(std::max(mel[m], 1e-10));
    }
  }
  return out;
}

/// Longest analysed segment; CRS tops out at 4 s.
inline constexpr double kMaxPatchSeconds = 4.1;

/// Fixed-size patch: the clip zero-padded on the right (or truncated) to 4.1 s.
inline LogMel mel_patch(const AudioClip& clip, const MelConfig& cfg = {}) {
  const auto win = static_cast<std::size_t>(std::lround(cfg.win_ms * clip.sample_rate() / 1000.0));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_ms * clip.sample_rate() / 1000.0));
  const auto max_samples = static_cast<std::size_t>(std::lround(kMaxPatchSeconds * clip.sample_rate()));
  const std::size_t frames = mel_frames_for(max_samples, win, hop);
  return log_mel(clip, cfg, frames, frames);
}

}  // namespace bsannot
