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
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bsannot/audio.hpp"
#include "bsannot/error.hpp"
#include "bsannot/patterns.hpp"
#include "bsannot/rng.hpp"

namespace bsannot {

// Synthetic conventions, not physiological claims: SB is a damped sinusoid,
// MB a group of SBs, CRS amplitude-modulated band noise, HS a harmonic stack.

struct SbParams {
  double duration_ms = 20.0;
  double freq_hz = 400.0;
};

struct MbParams {
  std::vector<SbParams> bursts;
  std::vector<double> gaps_ms;  // bursts.size() - 1 entries
};

struct CrsParams {
  double duration_ms = 1000.0;
  double band_lo_hz = 100.0;
  double band_hi_hz = 1000.0;
  double mod_hz = 4.0;
  double mod_depth = 0.4;  // envelope 1 + depth * sin(.), never reaches 0
  std::uint64_t seed = 1;
};

struct HsParams {
  double duration_ms = 800.0;
  double f0_hz = 150.0;
  int n_harmonics = 4;
};

struct NoneParams {
  double duration_ms = 500.0;
};

using EventParams = std::variant<SbParams, MbParams, CrsParams, HsParams, NoneParams>;

inline PatternLabel params_label(const EventParams& p) {
  switch (p.index()) {
    case 0: return PatternLabel::kSB;
    case 1: return PatternLabel::kMB;
    case 2: return PatternLabel::kCRS;
    case 3: return PatternLabel::kHS;
    default: return PatternLabel::kNone;
  }
}

inline double mb_total_ms(const MbParams& p) {
  double total = 0.0;
  for (const auto& b : p.bursts) total += b.duration_ms;
  for (double g : p.gaps_ms) total += g;
  return total;
}

inline double params_duration_ms(const EventParams& p) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MbParams>) {
          return mb_total_ms(v);
        } else {
          return v.duration_ms;
        }
      },
      p);
}

namespace synth_detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::kInvalidArgument, "synth params: " + what);
}

inline void check_sb(const SbParams& p, int fs) {
  require(p.duration_ms >= 10.0 && p.duration_ms <= 30.0, "SB duration must be 10-30 ms");
  require(p.freq_hz >= 150.0 && p.freq_hz <= 800.0, "SB frequency must be 150-800 Hz");
  require(p.freq_hz < 0.45 * fs, "SB frequency too close to Nyquist");
}

inline void validate(const EventParams& params, int fs) {
  std::visit(
      [fs](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SbParams>) {
          check_sb(p, fs);
        } else if constexpr (std::is_same_v<T, MbParams>) {
          require(p.bursts.size() >= 2 && p.bursts.size() <= 6, "MB needs 2-6 bursts");
          require(p.gaps_ms.size() + 1 == p.bursts.size(), "MB needs one gap per burst pair");
          for (const auto& b : p.bursts) check_sb(b, fs);
          for (double g : p.gaps_ms) require(g >= 30.0 && g <= 200.0, "MB gaps must be 30-200 ms");
          const double total = mb_total_ms(p);
          require(total >= 40.0 && total <= 1500.0, "MB total must be 40-1500 ms");
        } else if constexpr (std::is_same_v<T, CrsParams>) {
          require(p.duration_ms >= 200.0 && p.duration_ms <= 4000.0, "CRS duration must be 200-4000 ms");
          require(p.band_lo_hz >= 100.0 && p.band_hi_hz <= 1000.0 && p.band_lo_hz < p.band_hi_hz,
                  "CRS band must lie within 100-1000 Hz");
          require(p.band_hi_hz < 0.45 * fs, "CRS band too close to Nyquist");
          require(p.mod_depth >= 0.0 && p.mod_depth <= 0.8, "CRS modulation depth must be 0-0.8");
          require(p.mod_hz > 0.0 && p.mod_hz <= 20.0, "CRS modulation rate must be 0-20 Hz");
        } else if constexpr (std::is_same_v<T, HsParams>) {
          require(p.duration_ms >= 50.0 && p.duration_ms <= 1500.0, "HS duration must be 50-1500 ms");
          require(p.f0_hz >= 80.0 && p.f0_hz <= 300.0, "HS f0 must be 80-300 Hz");
          require(p.n_harmonics >= 3 && p.n_harmonics <= 4, "HS needs 3-4 harmonics");
          require(p.f0_hz * p.n_harmonics < 0.45 * fs, "HS harmonics too close to Nyquist");
        } else {
          require(p.duration_ms > 0.0, "None duration must be positive");
        }
      },
      params);
}

// RBJ second-order section.
struct Biquad {
  double b0, b1, b2, a1, a2;
  double z1 = 0.0, z2 = 0.0;

  static Biquad make(bool highpass, double f, int fs) {
    const double w = 2.0 * std::numbers::pi * f / fs;
    const double alpha = std::sin(w) / std::numbers::sqrt2;  // Q = 1/sqrt(2)
    const double c = std::cos(w);
    const double a0 = 1.0 + alpha;
    Biquad q{};
    if (highpass) {
      q.b0 = (1.0 + c) / 2.0 / a0;
      q.b1 = -(1.0 + c) / a0;
    } else {
      q.b0 = (1.0 - c) / 2.0 / a0;
      q.b1 = (1.0 - c) / a0;
    }
    q.b2 = q.b0;
    q.a1 = -2.0 * c / a0;
    q.a2 = (1.0 - alpha) / a0;
    return q;
  }

  double step(double x) {
    const double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
  }
};

inline std::size_t ms_to_samples(double ms, int fs) {
  return static_cast<std::size_t>(std::lround(ms / 1000.0 * fs));
}

inline void damped_sine(std::vector<double>& out, const SbParams& p, int fs) {
  const std::size_t n = ms_to_samples(p.duration_ms, fs);
  const double tau = p.duration_ms / 1000.0 / 5.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    out.push_back(std::exp(-t / tau) * std::sin(2.0 * std::numbers::pi * p.freq_hz * t));
  }
}

inline void fade(std::vector<double>& x, int fs, double ms = 5.0) {
  const std::size_t n = std::min(x.size() / 2, ms_to_samples(ms, fs));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / n);
    x[i] *= g;
    x[x.size() - 1 - i] *= g;
  }
}

inline void normalize_peak(std::vector<double>& x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : x) v /= peak;
  }
}

}  // namespace synth_detail

/// Renders one event with unit peak amplitude. None renders as silence.
inline AudioClip synth_event(const EventParams& params, int fs) {
  using namespace synth_detail;
  validate(params, fs);
  std::vector<double> x;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SbParams>) {
          damped_sine(x, p, fs);
        } else if constexpr (std::is_same_v<T, MbParams>) {
          for (std::size_t i = 0; i < p.bursts.size(); ++i) {
            damped_sine(x, p.bursts[i], fs);
            if (i < p.gaps_ms.size()) x.resize(x.size() + ms_to_samples(p.gaps_ms[i], fs), 0.0);
          }
        } else if constexpr (std::is_same_v<T, CrsParams>) {
          const std::size_t n = ms_to_samples(p.duration_ms, fs);
          Rng rng(p.seed);
          auto hp1 = Biquad::make(true, p.band_lo_hz, fs), hp2 = hp1;
          auto lp1 = Biquad::make(false, p.band_hi_hz, fs), lp2 = lp1;
          // Run the filters through a warm-up so the band noise is stationary.
          const std::size_t warm = ms_to_samples(50.0, fs);
          const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
          x.reserve(n);
          for (std::size_t i = 0; i < n + warm; ++i) {
            const double y = lp2.step(lp1.step(hp2.step(hp1.step(rng.gaussian()))));
            if (i < warm) continue;
            const double t = static_cast<double>(i - warm) / fs;
            x.push_back(y * (1.0 + p.mod_depth * std::sin(2.0 * std::numbers::pi * p.mod_hz * t + phase)));
          }
          fade(x, fs);
        } else if constexpr (std::is_same_v<T, HsParams>) {
          static constexpr double kAmp[] = {1.0, 0.7, 0.5, 0.35};
          const std::size_t n = ms_to_samples(p.duration_ms, fs);
          x.assign(n, 0.0);
          for (int h = 1; h <= p.n_harmonics; ++h) {
            for (std::size_t i = 0; i < n; ++i) {
              const double t = static_cast<double>(i) / fs;
              x[i] += kAmp[h - 1] * std::sin(2.0 * std::numbers::pi * p.f0_hz * h * t);
            }
          }
          fade(x, fs);
        } else {
          x.assign(ms_to_samples(p.duration_ms, fs), 0.0);
        }
      },
      params);
  normalize_peak(x);
  return AudioClip(std::move(x), fs);
}

struct ScriptEvent {
  double t_start_s = 0.0;
  EventParams params;
  double snr_db = 30.0;  // peak amplitude over noise RMS
  Quadrant channel = Quadrant::kRUQ;

  PatternLabel label() const { return params_label(params); }
};

inline constexpr double kMinSpacingS = 0.150;
inline constexpr double kMinSnrDb = 20.0;

struct SynthScript {
  std::uint64_t seed = 42;
  int fs = 8000;
  double duration_s = 10.0;
  double noise_floor_db = -60.0;  // noise RMS, dB re full scale
  int channels = 1;
  std::vector<ScriptEvent> events;

  /// Sorted, inside the recording, >= 150 ms apart per channel, durations
  /// inside the pattern ranges, SNR >= 20 dB.
  void validate() const {
    if (fs < kMinSampleRate) throw Error(Errc::kInvalidArgument, "script fs below 2000 Hz");
    if (channels < 1 || channels > 4) throw Error(Errc::kInvalidArgument, "script needs 1-4 channels");
    if (!(duration_s > 0.0)) throw Error(Errc::kInvalidArgument, "script duration must be positive");
    std::map<Quadrant, double> last_end;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto& e = events[i];
      const std::string where = "event " + std::to_string(i) + ": ";
      synth_detail::validate(e.params, fs);
      if (static_cast<int>(e.channel) >= channels) {
        throw Error(Errc::kInvalidArgument, where + "channel out of range");
      }
      if (e.label() != PatternLabel::kNone && e.snr_db < kMinSnrDb) {
        throw Error(Errc::kInvalidArgument, where + "SNR below 20 dB");
      }
      const double end = e.t_start_s + params_duration_ms(e.params) / 1000.0;
      if (e.t_start_s < 0.0 || end > duration_s) {
        throw Error(Errc::kOutOfRange, where + "outside the recording");
      }
      auto it = last_end.find(e.channel);
      if (it != last_end.end() && e.t_start_s < it->second + kMinSpacingS - 1e-9) {
        throw Error(Errc::kOverlap, where + "overlaps or is closer than 150 ms to its predecessor");
      }
      last_end[e.channel] = end;
    }
  }
};

struct RenderedScript {
  Recording recording;
  std::map<Quadrant, LabelTrack> truth;
};

/// Deterministic for a given script: white noise floor per channel plus each
/// event scaled to its peak SNR. Ground truth has one segment per event.
inline RenderedScript render(const SynthScript& script) {
  script.validate();
  const Rng root(script.seed);
  const double noise_rms = std::pow(10.0, script.noise_floor_db / 20.0);
  const auto n = static_cast<std::size_t>(std::llround(script.duration_s * script.fs));

  std::map<Quadrant, std::vector<double>> audio;
  std::map<Quadrant, std::vector<Segment>> segments;
  for (int c = 0; c < script.channels; ++c) {
    Rng rng = root.fork(1000 + static_cast<std::uint64_t>(c));
    std::vector<double> x(n);
    for (double& v : x) v = noise_rms * rng.gaussian();
    audio.emplace(kQuadrantOrder[c], std::move(x));
    segments[kQuadrantOrder[c]];
  }

  for (const auto& e : script.events) {
    auto& x = audio.at(e.channel);
    const std::size_t at = time_to_index(e.t_start_s, script.fs);
    const AudioClip clip = synth_event(e.params, script.fs);
    if (e.label() != PatternLabel::kNone) {
      const double peak = noise_rms * std::pow(10.0, e.snr_db / 20.0);
      const auto s = clip.samples();
      for (std::size_t i = 0; i < s.size() && at + i < x.size(); ++i) x[at + i] += peak * s[i];
    }
    const double start = static_cast<double>(at) / script.fs;
    segments[e.channel].push_back(
        Segment::from_seconds(start, start + clip.duration_s(), e.label()));
  }

  std::map<Quadrant, AudioClip> clips;
  std::map<Quadrant, LabelTrack> truth;
  for (auto& [q, x] : audio) {
    for (double v : x) {
      if (!(v >= -1.0 && v <= 1.0)) {
        throw Error(Errc::kOutOfRange, "rendered audio clips; lower the SNR or noise floor");
      }
    }
    clips.emplace(q, AudioClip(std::move(x), script.fs));
    truth.emplace(q, LabelTrack(std::move(segments[q]), TrackSource::kManual));
  }
  return {Recording(std::move(clips)), std::move(truth)};
}

/// Settings for generating a scripted corpus with a given label mix.
struct CorpusSpec {
  std::uint64_t seed = 42;
  int fs = 8000;
  double noise_floor_db = -60.0;
  std::size_t n_segments = 1000;
  // Fractions per label (None included); counts use largest remainders.
  std::map<PatternLabel, double> mix = {{PatternLabel::kNone, 0.49},
                                        {PatternLabel::kSB, 0.43},
                                        {PatternLabel::kMB, 0.05},
                                        {PatternLabel::kCRS, 0.029},
                                        {PatternLabel::kHS, 0.001}};
  double min_spacing_s = 0.4;
  double max_spacing_s = 1.2;
  double min_snr_db = 20.0;
  double max_snr_db = 35.0;
  // Continuous sounds carry less energy per unit peak; they get their own range.
  double crs_min_snr_db = 30.0;
  double crs_max_snr_db = 40.0;
};

inline std::map<PatternLabel, std::size_t> mix_counts(const std::map<PatternLabel, double>& mix,
                                                      std::size_t n) {
  double total = 0.0;
  for (const auto& [l, f] : mix) {
    if (f < 0.0) throw Error(Errc::kInvalidArgument, "negative mix fraction");
    total += f;
  }
  if (!(total > 0.0)) throw Error(Errc::kInvalidArgument, "empty label mix");
  std::map<PatternLabel, std::size_t> counts;
  std::vector<std::pair<double, PatternLabel>> rem;
  std::size_t used = 0;
  for (const auto& [l, f] : mix) {
    const double exact = f / total * static_cast<double>(n);
    counts[l] = static_cast<std::size_t>(std::floor(exact));
    used += counts[l];
    rem.emplace_back(exact - std::floor(exact), l);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < n; ++i, ++used) ++counts[rem[i % rem.size()].second];
  return counts;
}

inline EventParams random_params(PatternLabel label, Rng& rng, int fs) {
  auto sb = [&] {
    SbParams p;
    p.duration_ms = rng.uniform(10.0, 30.0);
    p.freq_hz = rng.uniform(150.0, std::min(800.0, 0.44 * fs));
    return p;
  };
  switch (label) {
    case PatternLabel::kSB: return sb();
    case PatternLabel::kMB: {
      MbParams p;
      const auto k = rng.integer(2, 6);
      for (std::int64_t i = 0; i < k; ++i) {
        p.bursts.push_back(sb());
        if (i + 1 < k) p.gaps_ms.push_back(rng.uniform(30.0, 200.0));
      }
      return p;
    }
    case PatternLabel::kCRS: {
      CrsParams p;
      p.duration_ms = rng.uniform(200.0, 4000.0);
      p.band_lo_hz = rng.uniform(100.0, 250.0);
      p.band_hi_hz = std::min(rng.uniform(600.0, 1000.0), 0.44 * fs);
      p.mod_hz = rng.uniform(2.0, 8.0);
      p.mod_depth = rng.uniform(0.1, 0.5);
      p.seed = rng.next_u64();
      return p;
    }
    case PatternLabel::kHS: {
      HsParams p;
      p.duration_ms = rng.uniform(50.0, 1500.0);
      p.n_harmonics = static_cast<int>(rng.integer(3, 4));
      p.f0_hz = rng.uniform(80.0, std::min(300.0, 0.44 * fs / p.n_harmonics));
      return p;
    }
    case PatternLabel::kNone: {
      NoneParams p;
      p.duration_ms = rng.uniform(200.0, 2000.0);
      return p;
    }
  }
  return NoneParams{};
}

/// Single-channel script holding exactly the mixed label counts in shuffled
/// order, separated by uniform random spacing.
inline SynthScript generate_script(const CorpusSpec& spec) {
  Rng rng(spec.seed);
  std::vector<PatternLabel> labels;
  for (const auto& [l, c] : mix_counts(spec.mix, spec.n_segments)) labels.insert(labels.end(), c, l);
  for (std::size_t i = labels.size(); i > 1; --i) {
    std::swap(labels[i - 1], labels[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
  }

  SynthScript script;
  script.seed = spec.seed;
  script.fs = spec.fs;
  script.noise_floor_db = spec.noise_floor_db;
  double t = rng.uniform(spec.min_spacing_s, spec.max_spacing_s);
  for (PatternLabel l : labels) {
    ScriptEvent e;
    // Land on the sample grid so the truth segment starts where audio does.
    e.t_start_s = std::round(t * spec.fs) / spec.fs;
    e.params = random_params(l, rng, spec.fs);
    e.snr_db = l == PatternLabel::kCRS ? rng.uniform(spec.crs_min_snr_db, spec.crs_max_snr_db)
                                       : rng.uniform(spec.min_snr_db, spec.max_snr_db);
    const double len = synth_event(e.params, spec.fs).duration_s();
    t = e.t_start_s + len + rng.uniform(spec.min_spacing_s, spec.max_spacing_s);
    script.events.push_back(std::move(e));
  }
  script.duration_s = std::ceil(t);
  return script;
}

// JSON form of scripts.

inline nlohmann::json params_to_json(const EventParams& params) {
  using nlohmann::json;
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SbParams>) {
          return {{"duration_ms", p.duration_ms}, {"freq_hz", p.freq_hz}};
        } else if constexpr (std::is_same_v<T, MbParams>) {
          json bursts = json::array();
          for (const auto& b : p.bursts) bursts.push_back({{"duration_ms", b.duration_ms}, {"freq_hz", b.freq_hz}});
          return {{"bursts", bursts}, {"gaps_ms", p.gaps_ms}};
        } else if constexpr (std::is_same_v<T, CrsParams>) {
          return {{"duration_ms", p.duration_ms}, {"band_lo_hz", p.band_lo_hz},
                  {"band_hi_hz", p.band_hi_hz},   {"mod_hz", p.mod_hz},
                  {"mod_depth", p.mod_depth},     {"seed", p.seed}};
        } else if constexpr (std::is_same_v<T, HsParams>) {
          return {{"duration_ms", p.duration_ms}, {"f0_hz", p.f0_hz}, {"n_harmonics", p.n_harmonics}};
        } else {
          return {{"duration_ms", p.duration_ms}};
        }
      },
      params);
}

/// Missing fields are drawn from rng within the pattern ranges.
inline EventParams params_from_json(PatternLabel label, const nlohmann::json& j, Rng& rng, int fs) {
  EventParams p = random_params(label, rng, fs);
  std::visit(
      [&](auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SbParams>) {
          v.duration_ms = j.value("duration_ms", v.duration_ms);
          v.freq_hz = j.value("freq_hz", v.freq_hz);
        } else if constexpr (std::is_same_v<T, MbParams>) {
          if (j.contains("bursts")) {
            v.bursts.clear();
            for (const auto& b : j.at("bursts")) {
              v.bursts.push_back({b.value("duration_ms", 20.0), b.value("freq_hz", 400.0)});
            }
            v.gaps_ms = j.value("gaps_ms", std::vector<double>(v.bursts.empty() ? 0 : v.bursts.size() - 1, 50.0));
          }
        } else if constexpr (std::is_same_v<T, CrsParams>) {
          v.duration_ms = j.value("duration_ms", v.duration_ms);
          v.band_lo_hz = j.value("band_lo_hz", v.band_lo_hz);
          v.band_hi_hz = j.value("band_hi_hz", v.band_hi_hz);
          v.mod_hz = j.value("mod_hz", v.mod_hz);
          v.mod_depth = j.value("mod_depth", v.mod_depth);
          v.seed = j.value("seed", v.seed);
        } else if constexpr (std::is_same_v<T, HsParams>) {
          v.duration_ms = j.value("duration_ms", v.duration_ms);
          v.f0_hz = j.value("f0_hz", v.f0_hz);
          v.n_harmonics = j.value("n_harmonics", v.n_harmonics);
        } else {
          v.duration_ms = j.value("duration_ms", v.duration_ms);
        }
      },
      p);
  return p;
}

inline nlohmann::json script_to_json(const SynthScript& s) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : s.events) {
    events.push_back({{"label", label_name(e.label())},
                      {"t_start_s", e.t_start_s},
                      {"snr_db", e.snr_db},
                      {"channel", quadrant_name(e.channel)},
                      {"params", params_to_json(e.params)}});
  }
  return {{"v", 1},
          {"seed", s.seed},
          {"fs", s.fs},
          {"duration_s", s.duration_s},
          {"noise_floor_db", s.noise_floor_db},
          {"channels", s.channels},
          {"events", events}};
}

/// Accepts either an explicit "events" list or a "generate" block
/// ({"n_segments", "mix", "min_spacing_s", "max_spacing_s"}).
inline SynthScript script_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("generate")) {
      const auto& g = j.at("generate");
      CorpusSpec spec;
      spec.seed = j.value("seed", spec.seed);
      spec.fs = j.value("fs", spec.fs);
      spec.noise_floor_db = j.value("noise_floor_db", spec.noise_floor_db);
      spec.n_segments = g.value("n_segments", spec.n_segments);
      spec.min_spacing_s = g.value("min_spacing_s", spec.min_spacing_s);
      spec.max_spacing_s = g.value("max_spacing_s", spec.max_spacing_s);
      if (g.contains("mix")) {
        spec.mix.clear();
        for (const auto& [k, v] : g.at("mix").items()) spec.mix[parse_label(k)] = v.get<double>();
      }
      SynthScript s = generate_script(spec);
      s.validate();
      return s;
    }
    SynthScript s;
    s.seed = j.value("seed", s.seed);
    s.fs = j.value("fs", s.fs);
    s.duration_s = j.at("duration_s").get<double>();
    s.noise_floor_db = j.value("noise_floor_db", s.noise_floor_db);
    s.channels = j.value("channels", s.channels);
    Rng rng(s.seed ^ 0x5EED5EEDull);
    for (const auto& ej : j.value("events", nlohmann::json::array())) {
      ScriptEvent e;
      const PatternLabel label = parse_label(ej.at("label").get<std::string>());
      e.t_start_s = ej.at("t_start_s").get<double>();
      e.snr_db = ej.value("snr_db", 30.0);
      if (ej.contains("channel")) e.channel = parse_quadrant(ej.at("channel").get<std::string>());
      e.params = params_from_json(label, ej.value("params", nlohmann::json::object()), rng, s.fs);
      s.events.push_back(std::move(e));
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("script JSON: ") + e.what());
  }
}

}  // namespace bsannot
