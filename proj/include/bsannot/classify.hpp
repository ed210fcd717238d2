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
#include <bit>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsannot/audio.hpp"
#include "bsannot/detect.hpp"
#include "bsannot/dsp.hpp"
#include "bsannot/error.hpp"
#include "bsannot/patterns.hpp"

namespace bsannot {

/// Probabilities over {SB, MB, CRS, HS} in label order.
class ClassProbabilities {
 public:
  static constexpr double kTolerance = 1e-6;

  explicit ClassProbabilities(const std::array<double, 4>& p) : p_(p) {
    double sum = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::kOutOfRange, "probability outside [0, 1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kTolerance) {
      throw Error(Errc::kOutOfRange, "probabilities sum to " + std::to_string(sum));
    }
  }

  static ClassProbabilities uniform() { return ClassProbabilities({0.25, 0.25, 0.25, 0.25}); }

  static ClassProbabilities from_logits(const std::array<double, 4>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    std::array<double, 4> p{};
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) sum += p[i] = std::exp(z[i] - m);
    for (double& v : p) v /= sum;
    return ClassProbabilities(p);
  }

  /// winner gets p, the others share the residual.
  static ClassProbabilities winner(PatternLabel label, double p = 0.7) {
    std::array<double, 4> out;
    out.fill((1.0 - p) / 3.0);
    out[index(label)] = p;
    return ClassProbabilities(out);
  }

  double operator[](PatternLabel label) const { return p_[index(label)]; }
  const std::array<double, 4>& values() const { return p_; }

  // First maximum in label order, so ties resolve SB < MB < CRS < HS.
  PatternLabel argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 4; ++i) {
      if (p_[i] > p_[best]) best = i;
    }
    return kPatternLabels[best];
  }

  double max() const { return *std::max_element(p_.begin(), p_.end()); }

  bool operator==(const ClassProbabilities&) const = default;

 private:
  static std::size_t index(PatternLabel label) {
    if (label == PatternLabel::kNone) throw Error(Errc::kInvalidArgument, "None has no probability");
    return static_cast<std::size_t>(label);
  }

  std::array<double, 4> p_;
};

/// Per-clip facts shared by all events of that clip.
struct ClipContext {
  double noise_rms = 0.0;  // lower median of the 1 ms frame RMS
};

inline ClipContext clip_context(const AudioClip& clip) {
  const std::size_t n = clip.frame_len();
  const auto x = clip.samples();
  std::vector<double> rms;
  for (std::size_t i = 0; n > 0 && i + n <= x.size(); i += n) {
    double s = 0.0;
    for (std::size_t k = i; k < i + n; ++k) s += x[k] * x[k];
    rms.push_back(std::sqrt(s / static_cast<double>(n)));
  }
  return {rms.empty() ? 0.0 : dsp::lower_median(std::move(rms))};
}

/// Common face of the rule, spectral and external backends.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string id() const = 0;
  virtual ClassProbabilities classify(const AudioClip& clip, const EventInterval& event,
                                      const ClipContext& ctx) = 0;
};

struct RuleConfig {
  double harmonic_window_ms = 64.0;
  double harmonic_hop_ms = 10.0;
  double harmonic_sustain_ms = 50.0;
  int harmonic_min_peaks = 3;
  double peak_prominence_db = 10.0;
  double peak_floor_db = 40.0;     // peaks further below the frame maximum are ignored
  double sb_max_ms = 40.0;
  double crs_min_ms = 200.0;
  double gap_min_ms = 10.0;
  int envelope_frames = 5;         // smoothing of the 1 ms RMS envelope
  double silence_factor = 2.0;     // silent while envelope <= factor * noise_rms
  double winner_prob = 0.7;
};

/// What the rule tree saw; exposed for tests and debugging.
struct RuleTrace {
  double duration_ms = 0.0;
  std::size_t harmonic_run = 0;  // longest run of harmonic analysis frames
  std::size_t lobes = 0;         // non-silent groups split by gaps >= gap_min_ms
  bool internal_gap = false;
  PatternLabel decision = PatternLabel::kSB;
  const char* rule = "";
};

namespace rule_detail {

struct Peak {
  double hz;
  double db;
};

/// Prominent spectral peaks of one analysis frame.
inline std::vector<Peak> prominent_peaks(const std::vector<double>& db, double bin_hz, int fs,
                                         const RuleConfig& cfg) {
  const auto n = static_cast<std::ptrdiff_t>(db.size());
  const auto lo = static_cast<std::ptrdiff_t>(std::ceil(50.0 / bin_hz));
  const auto hi = std::min<std::ptrdiff_t>(n - 2, static_cast<std::ptrdiff_t>(std::min(0.45 * fs, 4000.0) / bin_hz));
  const auto reach = std::max<std::ptrdiff_t>(2, std::lround(40.0 / bin_hz));
  const double top = *std::max_element(db.begin(), db.end());
  std::vector<Peak> out;
  for (std::ptrdiff_t k = lo; k <= hi; ++k) {
    const double v = db[static_cast<std::size_t>(k)];
    if (v < top - cfg.peak_floor_db) continue;
    bool is_max = true;
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, k - reach / 2); is_max && j <= std::min(n - 1, k + reach / 2); ++j) {
      if (j != k && db[static_cast<std::size_t>(j)] > v) is_max = false;
      if (j < k && db[static_cast<std::size_t>(j)] == v) is_max = false;
    }
    if (!is_max) continue;
    const double left = db[static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, k - reach))];
    const double right = db[static_cast<std::size_t>(std::min(n - 1, k + reach))];
    if (v - left < cfg.peak_prominence_db || v - right < cfg.peak_prominence_db) continue;
    // Parabolic refinement of the peak position.
    const double a = db[static_cast<std::size_t>(k - 1)], c = db[static_cast<std::size_t>(k + 1)];
    const double den = a - 2.0 * v + c;
    const double shift = den < 0.0 ? 0.5 * (a - c) / den : 0.0;
    out.push_back({(static_cast<double>(k) + shift) * bin_hz, v});
  }
  return out;
}

/// True when at least min_peaks distinct harmonics of one fundamental appear.
inline bool harmonic_set(const std::vector<Peak>& peaks, double bin_hz, int min_peaks) {
  if (static_cast<int>(peaks.size()) < min_peaks) return false;
  for (const Peak& p : peaks) {
    for (int h = 1; h <= 4; ++h) {
      const double f0 = p.hz / h;
      if (f0 < 60.0 || f0 > 400.0) continue;
      const double tol = std::max(0.04 * f0, 2.0 * bin_hz);
      unsigned seen = 0;
      for (const Peak& q : peaks) {
        const long n = std::lround(q.hz / f0);
        if (n >= 1 && n <= 8 && std::abs(q.hz - static_cast<double>(n) * f0) <= tol) seen |= 1u << n;
      }
      if (std::popcount(seen) >= min_peaks) return true;
    }
  }
  return false;
}

/// Longest run of consecutive analysis frames inside [i0, i1) that hold a
/// harmonic peak set.
inline std::size_t harmonic_run(std::span<const double> x, std::size_t i0, std::size_t i1, int fs,
                                const RuleConfig& cfg) {
  const auto win = static_cast<std::size_t>(std::lround(cfg.harmonic_window_ms * fs / 1000.0));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.harmonic_hop_ms * fs / 1000.0)));
  const std::size_t nfft = dsp::next_pow2(4 * win);
  dsp::RealFft fft(nfft);
  const auto w = dsp::hann(win);
  const double bin_hz = static_cast<double>(fs) / static_cast<double>(nfft);
  std::vector<double> frame(nfft), power(fft.bins());
  std::size_t best = 0, run = 0;
  for (std::size_t c = i0; c <= i1; c += hop) {
    std::fill(frame.begin(), frame.end(), 0.0);
    const auto start = static_cast<std::ptrdiff_t>(c) - static_cast<std::ptrdiff_t>(win / 2);
    for (std::size_t k = 0; k < win; ++k) {
      const std::ptrdiff_t i = start + static_cast<std::ptrdiff_t>(k);
      if (i >= 0 && static_cast<std::size_t>(i) < x.size()) frame[k] = x[static_cast<std::size_t>(i)] * w[k];
    }
    fft.power(frame, power);
    for (double& p : power) p = 10.0 * std::log10(p + 1e-30);
    if (harmonic_set(prominent_peaks(power, bin_hz, fs, cfg), bin_hz, cfg.harmonic_min_peaks)) {
      best = std::max(best, ++run);
    } else {
      run = 0;
    }
  }
  return best;
}

}  // namespace rule_detail

/// Deterministic decision tree over duration, envelope lobes and harmonicity.
///
///   1. >= 3 harmonic peaks sustained for >= 50 ms          -> HS
///   2. shorter than 40 ms with a single amplitude lobe     -> SB
///   3. silent gaps >= 10 ms separating >= 2 lobes          -> MB
///   4. at least 200 ms with no silent gap                  -> CRS
///   otherwise the label whose duration range centre is nearest.
inline ClassProbabilities rule_classify(const AudioClip& clip, const EventInterval& event,
                                        const ClipContext& ctx, const RuleConfig& cfg = {},
                                        RuleTrace* trace = nullptr) {
  const int fs = clip.sample_rate();
  const double eps = 0.5 / fs;
  if (!(event.start_s >= 0.0) || !(event.end_s > event.start_s) || event.end_s > clip.duration_s() + eps) {
    throw Error(Errc::kOutOfRange, "event interval outside the clip");
  }
  const std::size_t n = std::max<std::size_t>(1, clip.frame_len());
  const std::size_t i0 = time_to_index(event.start_s, fs);
  const std::size_t i1 = std::min(time_to_index(event.end_s, fs), clip.size());
  const std::size_t frames = (i1 - std::min(i0, i1)) / n;
  if (frames < 2) throw Error(Errc::kTooShort, "event shorter than 2 frames");

  RuleTrace t;
  t.duration_ms = (event.end_s - event.start_s) * 1000.0;
  const auto x = clip.samples();

  std::vector<double> energy(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double s = 0.0;
    for (std::size_t k = i0 + f * n; k < i0 + (f + 1) * n; ++k) s += x[k] * x[k];
    energy[f] = s / static_cast<double>(n);
  }
  const auto env = dsp::moving_average(energy, cfg.envelope_frames);
  const double silent_level = cfg.silence_factor * cfg.silence_factor * ctx.noise_rms * ctx.noise_rms;
  const auto gap_frames = static_cast<std::size_t>(std::ceil(cfg.gap_min_ms - 1e-9));
  std::size_t silent_run = 0;
  bool seen_sound = false;
  for (std::size_t f = 0; f < frames; ++f) {
    if (env[f] <= silent_level) {
      ++silent_run;
      continue;
    }
    if (!seen_sound) {
      t.lobes = 1;
    } else if (silent_run >= gap_frames) {
      ++t.lobes;
      t.internal_gap = true;
    }
    seen_sound = true;
    silent_run = 0;
  }

  if (t.duration_ms >= pattern_spec(PatternLabel::kHS).min_ms) {
    t.harmonic_run = rule_detail::harmonic_run(x, i0, i1, fs, cfg);
  }

  // Analysis windows hanging over the edges of a short event are half noise,
  // so a short event only needs its interior frames to agree.
  const double needed_ms = std::min(cfg.harmonic_sustain_ms,
                                    std::max(2.0 * cfg.harmonic_hop_ms, t.duration_ms - 0.5 * cfg.harmonic_window_ms));
  if (t.harmonic_run > 0 && static_cast<double>(t.harmonic_run) * cfg.harmonic_hop_ms >= needed_ms) {
    t.decision = PatternLabel::kHS, t.rule = "harmonic";
  } else if (t.duration_ms < cfg.sb_max_ms && t.lobes <= 1) {
    t.decision = PatternLabel::kSB, t.rule = "short single lobe";
  } else if (t.lobes >= 2) {
    t.decision = PatternLabel::kMB, t.rule = "gapped lobes";
  } else if (t.duration_ms >= cfg.crs_min_ms && !t.internal_gap) {
    t.decision = PatternLabel::kCRS, t.rule = "long continuous";
  } else {
    double best = 1e300;
    for (const PatternSpec& s : kPatternSpecs) {
      const double d = std::abs(s.centroid_ms() - t.duration_ms);
      if (d < best) best = d, t.decision = s.label;
    }
    t.rule = "nearest duration";
  }
  if (trace != nullptr) *trace = t;
  return ClassProbabilities::winner(t.decision, cfg.winner_prob);
}

inline ClassProbabilities rule_classify(const AudioClip& clip, const EventInterval& event) {
  return rule_classify(clip, event, clip_context(clip));
}

class RuleClassifier : public Classifier {
 public:
  explicit RuleClassifier(RuleConfig cfg = {}) : cfg_(cfg) {}
  std::string id() const override { return "rule"; }
  ClassProbabilities classify(const AudioClip& clip, const EventInterval& event,
                              const ClipContext& ctx) override {
    return rule_classify(clip, event, ctx, cfg_);
  }

 private:
  RuleConfig cfg_;
};

/// Model id per cohort; unknown subjects go to the combined model.
struct CohortModelSelector {
  std::string healthy = "rule";
  std::string patient = "rule";
  std::string combined = "rule";

  const std::string& select(Cohort c) const {
    switch (c) {
      case Cohort::kHealthy: return healthy;
      case Cohort::kPatient: return patient;
      case Cohort::kUnknown: break;
    }
    return combined;
  }
};

using ModelRegistry = std::map<std::string, std::shared_ptr<Classifier>>;

struct ClassifyOptions {
  bool fallback_to_rule = true;  // on transport errors and timeouts
  TrackSource source = TrackSource::kAuto;
  RuleConfig rule;
};

struct EventFailure {
  std::size_t index = 0;
  Errc code = Errc::kInvalidArgument;
  std::string message;
};

struct ClassifiedTrack {
  LabelTrack track;
  std::vector<ClassProbabilities> probabilities;  // one per labelled segment
  std::vector<EventFailure> failures;              // events left unlabelled
  std::size_t fallbacks = 0;                       // events labelled by the rule tree instead
  std::string model_id;
};

/// Labels every event with the cohort-selected backend. A failing event is
/// reported and skipped; the others are unaffected.
inline ClassifiedTrack classify_track(const AudioClip& clip, const std::vector<EventInterval>& events,
                                      const ModelRegistry& models, const CohortModelSelector& selector,
                                      Cohort cohort, const ClassifyOptions& opts = {}) {
  ClassifiedTrack out;
  out.model_id = selector.select(cohort);
  const auto it = models.find(out.model_id);
  if (it == models.end() || !it->second) {
    throw Error(Errc::kNotFound, "no classifier registered as '" + out.model_id + "'");
  }
  Classifier& model = *it->second;
  const ClipContext ctx = clip_context(clip);
  std::vector<Segment> segments;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const EventInterval& e = events[i];
    std::optional<ClassProbabilities> p;
    try {
      try {
        p = model.classify(clip, e, ctx);
      } catch (const Error& err) {
        const bool unreachable = err.code() == Errc::kTransport || err.code() == Errc::kTimeout;
        if (!unreachable || !opts.fallback_to_rule) throw;
        p = rule_classify(clip, e, ctx, opts.rule);
        ++out.fallbacks;
      }
      segments.push_back(Segment::from_seconds(e.start_s, e.end_s, p->argmax(), p->max()));
      out.probabilities.push_back(*p);
    } catch (const Error& err) {
      out.failures.push_back({i, err.code(), err.what()});
    }
  }
  out.track = LabelTrack(std::move(segments), opts.source);
  return out;
}

}  // namespace bsannot
