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

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "bsannot/dsp.hpp"
#include "bsannot/framefeat.hpp"
#include "bsannot/rng.hpp"

namespace bsannot {
namespace {

AudioClip noise_clip(std::uint64_t seed, std::size_t n, double rms, int fs = 8000) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (double& v : x) v = rms * rng.gaussian();
  return AudioClip(std::move(x), fs);
}

TEST(RealFft, MatchesNaiveDft) {
  Rng rng(11);
  for (std::size_t n : {4u, 8u, 64u, 256u}) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    dsp::RealFft fft(n);
    std::vector<double> power(fft.bins());
    fft.power(x, power);
    for (std::size_t k = 0; k <= n / 2; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double a = -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n);
        re += x[t] * std::cos(a);
        im += x[t] * std::sin(a);
      }
      EXPECT_NEAR(power[k], re * re + im * im, 1e-9 * std::max(1.0, re * re + im * im));
    }
  }
}

TEST(LowerMedian, PicksLowerCentralValue) {
  EXPECT_EQ(dsp::lower_median(std::vector<double>{5, 1, 3, 2, 4}), 3.0);
  EXPECT_EQ(dsp::lower_median(std::vector<double>{4, 1, 3, 2}), 2.0);
  EXPECT_THROW(dsp::lower_median(std::vector<double>{}), Error);
}

TEST(FrameFeatures, ConstantClip) {
  const auto track = frame_features(AudioClip(std::vector<double>(800, 0.5), 8000));
  EXPECT_EQ(track.frame_len_samples, 8u);
  ASSERT_EQ(track.frames(), 100u);
  for (std::size_t i = 0; i < track.frames(); ++i) {
    EXPECT_DOUBLE_EQ(track.rms[i], 0.5);
    EXPECT_DOUBLE_EQ(track.energy[i], 2.0);
  }
}

TEST(FrameFeatures, ZeroClip) {
  const auto track = frame_features(AudioClip(std::vector<double>(800, 0.0), 8000));
  for (std::size_t i = 0; i < track.frames(); ++i) {
    EXPECT_EQ(track.rms[i], 0.0);
    EXPECT_EQ(track.energy[i], 0.0);
  }
}

TEST(FrameFeatures, HandArithmeticFrame) {
  std::vector<double> x(80, 0.0);
  x[0] = 3.0 / 5.0;
  x[1] = 4.0 / 5.0;
  const auto track = frame_features(AudioClip(x, 8000));
  EXPECT_NEAR(track.rms[0], std::sqrt((0.36 + 0.64) / 8.0), 1e-15);
  EXPECT_NEAR(track.rms[0], 0.35355339059327373, 1e-15);
  EXPECT_NEAR(track.energy[0], 1.0, 1e-15);
}

TEST(FrameFeatures, DiscardsPartialFrameAndRejectsShortClips) {
  EXPECT_EQ(frame_features(AudioClip(std::vector<double>(85, 0.1), 8000)).frames(), 10u);
  try {
    frame_features(AudioClip(std::vector<double>(79, 0.1), 8000));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kTooShort);
  }
}

TEST(FrameFeatures, EnergyMatchesRmsSquaredTimesN) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int fs = static_cast<int>(rng.integer(2000, 16000));
    const auto clip = noise_clip(rng.next_u64(), static_cast<std::size_t>(fs / 10), 0.2, fs);
    const auto track = frame_features(clip);
    const double n = static_cast<double>(track.frame_len_samples);
    for (std::size_t i = 0; i < track.frames(); ++i) {
      ASSERT_GE(track.rms[i], 0.0);
      ASSERT_LE(std::abs(track.energy[i] - n * track.rms[i] * track.rms[i]),
                1e-9 * std::max(1.0, track.energy[i]));
    }
  }
}

TEST(EnergyProfile, AllZeroClipIsFloorAndSilent) {
  const auto p = energy_db_profile(AudioClip(std::vector<double>(8000, 0.0), 8000));
  EXPECT_TRUE(p.silent);
  ASSERT_EQ(p.energy_db.size(), 1000u);
  for (double v : p.energy_db_smooth) EXPECT_EQ(v, -100.0);
}

TEST(EnergyProfile, ToneIsFlatAfterWarmUp) {
  std::vector<double> x(16000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(i) / 8000.0);
  }
  const auto p = energy_db_profile(AudioClip(x, 8000));
  double lo = 1e9, hi = -1e9;
  for (std::size_t i = 60; i + 20 < p.energy_db_smooth.size(); ++i) {
    lo = std::min(lo, p.energy_db_smooth[i]);
    hi = std::max(hi, p.energy_db_smooth[i]);
  }
  EXPECT_LE(hi - lo, 3.0);
  for (double v : p.energy_db) EXPECT_LE(v, 0.0);
}

TEST(EnergyProfile, BurstDominatesSilence) {
  std::vector<double> x(16000, 0.0);
  for (std::size_t i = 8000; i < 8160; ++i) {
    x[i] = 0.8 * std::sin(2.0 * std::numbers::pi * 400.0 * static_cast<double>(i) / 8000.0);
  }
  const auto p = energy_db_profile(AudioClip(x, 8000));
  double inside_min = 0.0;
  for (std::size_t i = 1000; i < 1020; ++i) inside_min = std::min(inside_min, p.energy_db_smooth[i]);
  for (std::size_t i = 0; i < p.energy_db_smooth.size(); ++i) {
    if (i + 60 < 1000 || i > 1020 + 60) {
      ASSERT_LE(p.energy_db_smooth[i], inside_min) << i;
    }
  }
  // The analysis windows spanning the burst hold the global peak bin.
  double peak = -1e9;
  for (double v : p.energy_db) peak = std::max(peak, v);
  double peak_inside = -1e9;
  for (std::size_t i = 1000; i < 1045; ++i) peak_inside = std::max(peak_inside, p.energy_db[i]);
  EXPECT_EQ(peak, peak_inside);
}

TEST(Normalize, StationaryNoiseIsMedianCentered) {
  const auto track = analyze(noise_clip(1, 40000, 0.01));
  std::size_t below = 0, at_or_below = 0;
  for (double v : track.energy_norm) {
    below += v < 0.0;
    at_or_below += v <= 0.0;
  }
  const std::size_t n = track.frames();
  EXPECT_LE(below, (n - 1) / 2);
  EXPECT_GE(at_or_below, (n + 1) / 2);
  EXPECT_EQ(thresholds(track).thr_energy_rel, 0.0);
  EXPECT_EQ(track.baseline_energy, dsp::lower_median(track.energy_db_smooth));
}

TEST(Normalize, GainInvariant) {
  const auto clip = noise_clip(2, 24000, 0.001);
  const auto a = analyze(clip);
  for (double g : {2.0, 0.37, 55.0}) {
    const auto b = analyze(scaled(clip, g));
    for (std::size_t i = 0; i < a.frames(); ++i) {
      ASSERT_NEAR(b.rms_norm[i], a.rms_norm[i], 1e-6 * a.rms_norm[i]);
      ASSERT_NEAR(b.energy_norm[i], a.energy_norm[i], 1e-6);
    }
  }
}

TEST(Normalize, SilentClipFails) {
  try {
    analyze(AudioClip(std::vector<double>(8000, 0.0), 8000));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kSilentBaseline);
  }
}

TEST(Thresholds, Examples) {
  FrameFeatureTrack t;
  t.rms_norm = {1, 2, 3, 4, 5};
  t.energy_delta = {0, 0, 0, 0, 0};  // constant profile
  t.energy_norm = {-2, -1, 0, 1, 2};
  const auto thr = thresholds(t);
  EXPECT_EQ(thr.thr_rms, 3.0);
  EXPECT_EQ(thr.thr_energy_delta, 0.0);
  EXPECT_EQ(thr.thr_energy_rel, 0.0);

  const std::vector<FrameFeatureTrack> both{t, t};
  EXPECT_EQ(pooled_thresholds(both).thr_rms, 3.0);
}

TEST(Thresholds, RobustToSparseLoudBursts) {
  const auto base = noise_clip(9, 80000, 0.01);
  std::vector<double> x(base.samples().begin(), base.samples().end());
  const auto clean = analyze(AudioClip(x, 8000));
  Rng rng(10);
  // 8% of frames overwritten with loud tone bursts.
  for (int b = 0; b < 40; ++b) {
    const auto at = static_cast<std::size_t>(rng.integer(0, 79000 - 160));
    for (std::size_t i = 0; i < 160; ++i) {
      x[at + i] = 0.5 * std::sin(2.0 * std::numbers::pi * 300.0 * static_cast<double>(i) / 8000.0);
    }
  }
  const auto dirty = analyze(AudioClip(x, 8000));
  EXPECT_LT(std::abs(thresholds(dirty).thr_energy_rel - thresholds(clean).thr_energy_rel), 1.0);
}

}  // namespace
}  // namespace bsannot
