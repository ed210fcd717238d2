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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Every check compares the library against an oracle that
// is computed here independently (brute force, synthesis ground truth or
// hand-built fixtures).

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bsannot/classify.hpp"
#include "bsannot/detect.hpp"
#include "bsannot/evalstats.hpp"
#include "bsannot/framefeat.hpp"
#include "bsannot/pipeline.hpp"
#include "bsannot/postproc.hpp"
#include "bsannot/rng.hpp"
#include "bsannot/spectral.hpp"
#include "bsannot/synth.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace bsannot;
using L = PatternLabel;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

LabelTrack as_track(const std::vector<EventInterval>& events) {
  std::vector<Segment> segs;
  for (const auto& e : events) segs.push_back(Segment::from_seconds(e.start_s, e.end_s, L::kSB));
  return LabelTrack(std::move(segs), TrackSource::kAuto);
}

// Frame energy equals N times the squared frame RMS, and both match a direct
// sum of squares.
Outcome eq_consistency() {
  Rng rng(2024);
  const int rates[] = {2000, 4000, 8000, 11025, 16000, 22050, 44100};
  double worst = 0.0;
  std::size_t frames = 0;
  for (int c = 0; c < 1000; ++c) {
    const int fs = rates[rng.integer(0, 6)];
    const auto n = static_cast<std::size_t>(rng.integer(fs / 50, fs / 2));
    const double amp = std::pow(10.0, rng.uniform(-5.0, 0.0));
    std::vector<double> x(n);
    for (double& v : x) v = std::clamp(amp * rng.gaussian(), -1.0, 1.0);
    const AudioClip clip(x, fs);
    const auto t = frame_features(clip);
    const std::size_t len = t.frame_len_samples;
    for (std::size_t i = 0; i < t.frames(); ++i) {
      long double direct = 0.0L;
      for (std::size_t k = 0; k < len; ++k) direct += static_cast<long double>(x[i * len + k]) * x[i * len + k];
      const double scale = std::max(std::abs(t.energy[i]), 1e-300);
      const double identity = std::abs(t.energy[i] - static_cast<double>(len) * t.rms[i] * t.rms[i]) / scale;
      const double oracle = std::abs(t.energy[i] - static_cast<double>(direct)) / scale;
      worst = std::max({worst, identity, oracle});
      ++frames;
    }
  }
  return {worst <= 1e-9, fmt("1000 clips, %zu frames, max relative error %.3g", frames, worst)};
}

Outcome scale_invariance() {
  Rng rng(77);
  std::size_t runs = 0, events = 0, mismatched = 0;
  for (std::uint64_t c = 0; c < 8; ++c) {
    CorpusSpec spec;
    spec.seed = 500 + c;
    spec.n_segments = 24;
    spec.noise_floor_db = -90.0;  // leaves room for a gain of 100
    const AudioClip clip = render(generate_script(spec)).recording.channel(Quadrant::kRUQ);
    const auto ref = detect_clip(clip);
    events += ref.size();
    std::vector<double> gains = {0.01, 100.0};
    for (int k = 0; k < 4; ++k) gains.push_back(std::pow(10.0, rng.uniform(-2.0, 2.0)));
    for (double g : gains) {
      const auto got = detect_clip(scaled(clip, g));
      ++runs;
      bool same = got.size() == ref.size();
      for (std::size_t i = 0; same && i < got.size(); ++i) {
        same = std::llround(got[i].start_s * 1000) == std::llround(ref[i].start_s * 1000) &&
               std::llround(got[i].end_s * 1000) == std::llround(ref[i].end_s * 1000) &&
               got[i].frame_span == ref[i].frame_span;
      }
      if (!same) ++mismatched;
    }
  }
  return {mismatched == 0 && events > 0,
          fmt("%zu gain runs over 8 clips (%zu events), %zu runs differ", runs, events, mismatched)};
}

// One ~30 minute healthy-mix recording, shared by the detection checks.
struct Corpus {
  SynthScript script;
  RenderedScript rendered;
};

const Corpus& detection_corpus() {
  static const Corpus c = [] {
    CorpusSpec spec;
    spec.seed = 4242;
    spec.n_segments = 1100;
    Corpus out;
    out.script = generate_script(spec);
    out.script.duration_s = std::max(out.script.duration_s, 1800.0);
    out.rendered = render(out.script);
    return out;
  }();
  return c;
}

Outcome detection_oracle() {
  const auto& c = detection_corpus();
  const AudioClip& clip = c.rendered.recording.channel(Quadrant::kRUQ);
  const LabelTrack& truth = c.rendered.truth.at(Quadrant::kRUQ);
  const auto t0 = std::chrono::steady_clock::now();
  const auto events = detect_clip(clip);
  const double runtime = seconds_since(t0);
  const auto a = agreement(truth, as_track(events), {.min_iou = 0.3, .span_s = clip.duration_s()});
  const double recall = static_cast<double>(a.matched) / static_cast<double>(a.reference_events);
  const double precision = static_cast<double>(a.matched) / static_cast<double>(a.candidate_events);
  const bool ok = a.reference_events >= 500 && recall >= 0.95 && precision >= 0.90 && runtime < 60.0 &&
                  clip.duration_s() >= 1800.0;
  return {ok, fmt("%zu scripted events in %.0f s of 8 kHz audio: recall %.4f, precision %.4f, detection %.2f s",
                  a.reference_events, clip.duration_s(), recall, precision, runtime)};
}

Outcome crs_fragmentation() {
  std::vector<std::vector<EventInterval>> detected;
  std::vector<LabelTrack> truths;
  // The healthy mix has few CRS events, so two more recordings enrich CRS
  // while staying None-dominant in time, as real recordings are.
  const auto& big = detection_corpus();
  truths.push_back(big.rendered.truth.at(Quadrant::kRUQ));
  detected.push_back(detect_clip(big.rendered.recording.channel(Quadrant::kRUQ)));
  for (std::uint64_t seed : {31, 32}) {
    CorpusSpec spec;
    spec.seed = seed;
    spec.n_segments = 800;
    spec.mix = {{L::kNone, 0.6}, {L::kSB, 0.3}, {L::kCRS, 0.1}};
    const auto r = render(generate_script(spec));
    truths.push_back(r.truth.at(Quadrant::kRUQ));
    detected.push_back(detect_clip(r.recording.channel(Quadrant::kRUQ)));
  }

  std::size_t total = 0, single = 0;
  for (std::size_t k = 0; k < truths.size(); ++k) {
    for (const Segment& s : truths[k].segments()) {
      if (s.label() != L::kCRS) continue;
      ++total;
      std::size_t hits = 0;
      for (const auto& e : detected[k]) {
        if (seconds_to_us(e.start_s) < s.end_us() && seconds_to_us(e.end_s) > s.start_us()) ++hits;
      }
      single += hits == 1;
    }
  }
  const double frac = static_cast<double>(single) / static_cast<double>(total);
  return {frac >= 0.90, fmt("%zu of %zu scripted CRS events map to exactly one interval (%.3f)", single, total, frac)};
}

std::vector<TrainingItem> balanced_corpus(int subjects, std::size_t per_subject, std::uint64_t seed0) {
  std::vector<TrainingItem> corpus;
  for (int s = 0; s < subjects; ++s) {
    CorpusSpec spec;
    spec.seed = seed0 + static_cast<std::uint64_t>(s);
    spec.n_segments = per_subject;
    spec.mix = {{L::kSB, 1}, {L::kMB, 1}, {L::kCRS, 1}, {L::kHS, 1}};
    auto r = render(generate_script(spec));
    corpus.push_back({"S" + std::to_string(spec.seed), r.recording.channel(Quadrant::kRUQ), r.truth.at(Quadrant::kRUQ)});
  }
  return corpus;
}

Outcome classifier_sanity() {
  const auto corpus = balanced_corpus(20, 40, 9000);  // 200 events per class
  std::size_t n = 0, correct = 0;
  for (const auto& item : corpus) {
    const ClipContext ctx = clip_context(item.clip);
    for (const Segment& s : item.track.segments()) {
      const EventInterval e{s.start_s(), s.end_s(), 0.0, 0};
      correct += rule_classify(item.clip, e, ctx, {}).argmax() == s.label();
      ++n;
    }
  }
  const double rule_acc = static_cast<double>(correct) / static_cast<double>(n);
  const auto t0 = std::chrono::steady_clock::now();
  const auto trained = train_spectral(corpus, "combined");
  const double train_s = seconds_since(t0);
  const double test_acc = trained.test_accuracy.value_or(0.0);
  const bool ok = rule_acc >= 0.90 && trained.test_accuracy && test_acc >= 0.95;
  return {ok, fmt("rule accuracy %.4f on %zu events; spectral held-out accuracy %.4f on %zu test segments "
                  "(%zu subjects, trained in %.1f s)",
                  rule_acc, n, test_acc, trained.test_segments, trained.split.test.size(), train_s)};
}

Outcome auroc_oracle() {
  Rng rng(5150);
  std::size_t trials = 0, compared = 0, mismatched = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto n = static_cast<std::size_t>(rng.integer(1, 200));
    // Coarse scores on a 1/10 grid so that ties are common.
    const int grid = t % 2 == 0 ? 10 : 1000;
    std::vector<L> labels(n);
    std::vector<ClassProbabilities> scores;
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = kPatternLabels[static_cast<std::size_t>(rng.integer(0, 3))];
      std::array<std::int64_t, 4> k{};
      std::int64_t left = grid;
      for (int c = 0; c < 3; ++c) left -= (k[c] = rng.integer(0, left));
      k[3] = left;
      scores.emplace_back(std::array<double, 4>{static_cast<double>(k[0]) / grid, static_cast<double>(k[1]) / grid,
                                                static_cast<double>(k[2]) / grid, static_cast<double>(k[3]) / grid});
    }
    const auto r = auroc(labels, scores);
    ++trials;
    for (L c : kPatternLabels) {
      double wins = 0.0;
      std::size_t pairs = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != c) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (labels[j] == c) continue;
          ++pairs;
          if (scores[i][c] > scores[j][c]) wins += 1.0;
          else if (scores[i][c] == scores[j][c]) wins += 0.5;
        }
      }
      if (pairs == 0) {
        mismatched += r.per_class.at(c).has_value();
        continue;
      }
      ++compared;
      const double brute = wins / static_cast<double>(pairs);
      mismatched += !r.per_class.at(c) || *r.per_class.at(c) != brute;
    }
  }
  return {mismatched == 0, fmt("%zu random inputs (n <= 200), %zu class AUROCs, %zu differ from brute force", trials,
                               compared, mismatched)};
}

Outcome postprocessing() {
  Rng rng(8080);
  std::size_t not_idempotent = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto track = testing::random_track(rng, static_cast<std::size_t>(rng.integer(0, 40)), true, t % 2 == 1);
    const double total = static_cast<double>(track.span_us() + rng.integer(0, 3'000'000)) / 1e6;
    PostprocConfig cfg;
    cfg.gap_fill_min_ms = static_cast<int>(rng.integer(0, 300));
    cfg.merge_max_gap_ms = static_cast<int>(rng.integer(0, 50));
    if (!refine_idempotent_check(track, total, cfg)) ++not_idempotent;
  }
  const std::string dir = BSANNOT_TEST_DATA;
  const auto input = parse_label_track(read_text_file(dir + "/gapfill_input.txt"));
  const std::string golden = read_text_file(dir + "/gapfill_golden.txt");
  const bool golden_ok = write_label_track(refine(input, 2.0)) == golden;

  auto filled = [](std::int64_t gap_ms) {
    const LabelTrack t({Segment(0, 500'000, L::kSB), Segment(500'000 + gap_ms * 1000, 800'000 + gap_ms * 1000, L::kSB)});
    return refine(t, static_cast<double>(800 + gap_ms) / 1000.0).size() == 3;
  };
  const bool boundary_ok = !filled(100) && filled(101);
  return {not_idempotent == 0 && golden_ok && boundary_ok,
          fmt("idempotence failures %zu/1000; gap-fill golden %s; 100 ms gap %s, 101 ms gap %s", not_idempotent,
              golden_ok ? "byte-exact" : "DIFFERS", filled(100) ? "filled" : "kept", filled(101) ? "filled" : "kept")};
}

Outcome label_format() {
  Rng rng(99);
  std::size_t bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto raw = testing::random_track(rng, static_cast<std::size_t>(rng.integer(0, 60)), true, t % 2 == 1);
    std::vector<Segment> plain;  // the text format carries no confidence
    for (const Segment& s : raw.segments()) plain.emplace_back(s.start_us(), s.end_us(), s.label());
    const LabelTrack track(std::move(plain));
    const std::string text = write_label_track(track);
    const LabelTrack back = parse_label_track(text);
    if (!(back == track) || write_label_track(back) != text) ++bad;
  }
  const std::string dir = BSANNOT_TEST_DATA;
  const std::string golden = read_text_file(dir + "/audacity_export.txt");
  const bool export_ok = write_label_track(parse_label_track(golden)) == golden;
  const bool normalize_ok =
      write_label_track(parse_label_track(read_text_file(dir + "/audacity_unsorted_crlf.txt"))) == golden;
  return {bad == 0 && export_ok && normalize_ok,
          fmt("round-trip failures %zu/1000; Audacity golden %s; unsorted CRLF variant %s", bad,
              export_ok ? "byte-exact" : "DIFFERS", normalize_ok ? "normalizes byte-exact" : "DIFFERS")};
}

Outcome reports() {
  // Adjustment fixture, SB row: 400 automatic events of 84 ms; the expert keeps 315 of
  // 101 ms.
  std::vector<Segment> a, e;
  for (int i = 0; i < 400; ++i) a.emplace_back(i * 1'000'000LL, i * 1'000'000LL + 84'000, L::kSB);
  for (int i = 0; i < 315; ++i) e.emplace_back(i * 1'000'000LL, i * 1'000'000LL + 101'000, L::kSB);
  AdjustmentOptions opts;
  opts.span_s = 400.0;
  const auto adj = adjustment_report(LabelTrack(a, TrackSource::kAuto), LabelTrack(e, TrackSource::kExpertAdjusted), opts);
  const auto row = to_json(adj)["rows"][1];
  const bool table_ok = row["label"] == "SB" && row["auto_count"] == 400 && row["expert_count"] == 315 &&
                        row["mean_dur_auto_s"] == 0.084 && row["mean_dur_expert_s"] == 0.101;

  // Healthy-cohort mix encoded in a 1000-segment scripted track.
  CorpusSpec spec;
  spec.seed = 5;
  spec.n_segments = 1000;
  const auto script = generate_script(spec);
  std::vector<Segment> segs;
  for (const auto& ev : script.events) {
    const double len = params_duration_ms(ev.params) / 1000.0;
    segs.push_back(Segment::from_seconds(ev.t_start_s, ev.t_start_s + len, ev.label()));
  }
  const auto dist = distribution(LabelTrack(segs), ReportGroup::kOriginal);
  const std::map<L, double> expected = {{L::kNone, 49.0}, {L::kSB, 43.0}, {L::kMB, 5.0}, {L::kCRS, 2.9}, {L::kHS, 0.1}};
  double worst = 0.0, sum = 0.0;
  std::ostringstream got;
  for (const auto& [l, pct] : expected) {
    const double p = 100.0 * dist.labels.at(l).normalized_count;
    worst = std::max(worst, std::abs(p - pct));
    sum += dist.labels.at(l).normalized_count;
    got << ' ' << label_name(l) << '=' << p;
  }
  const bool dist_ok = worst <= 0.1 && std::abs(sum - 1.0) <= 1e-9;
  return {table_ok && dist_ok,
          fmt("adjustment SB row %s (auto %s, expert %s, %s s, %s s); healthy-mix distribution max deviation %.3f pp:%s",
              table_ok ? "exact" : "DIFFERS", row["auto_count"].dump().c_str(), row["expert_count"].dump().c_str(),
              row["mean_dur_auto_s"].dump().c_str(), row["mean_dur_expert_s"].dump().c_str(), worst,
              got.str().c_str())};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BSANNOT_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome annotate_determinism() {
  const fs::path dir = fs::temp_directory_path() / "bsannot_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CorpusSpec spec;
  spec.seed = 12;
  spec.n_segments = 120;
  auto script = generate_script(spec);
  // Copy the events to a second channel, shifted, for a two-channel input.
  script.channels = 2;
  const auto first = script.events;
  for (auto ev : first) {
    ev.channel = Quadrant::kLUQ;
    script.events.push_back(ev);
  }
  write_wav(dir / "rec.wav", render(script).recording);
  const std::string in = (dir / "rec.wav").string();
  const int c1 = run_cli("annotate --in " + in + " --out " + (dir / "a").string());
  const int c2 = run_cli("annotate --in " + in + " --out " + (dir / "b").string() + " --jobs 2");
  bool same = c1 == 0 && c2 == 0;
  std::size_t files = 0;
  for (const char* f : {"rec.RUQ.labels.txt", "rec.LUQ.labels.txt"}) {
    same = same && read_text_file(dir / "a" / f) == read_text_file(dir / "b" / f);
    ++files;
  }
  auto ma = read_json_file(dir / "a" / "rec.manifest.json");
  auto mb = read_json_file(dir / "b" / "rec.manifest.json");
  ma.erase("timings");
  mb.erase("timings");
  same = same && ma.dump() == mb.dump();
  fs::remove_all(dir);
  return {same, fmt("exit codes %d/%d; %zu label files and manifest (timings excluded) %s", c1, c2, files,
                    same ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  report("eq-consistency", eq_consistency);
  report("scale-invariance", scale_invariance);
  report("detection-oracle", detection_oracle);
  report("crs-anti-fragmentation", crs_fragmentation);
  report("classifier-sanity", classifier_sanity);
  report("auroc-oracle", auroc_oracle);
  report("post-processing", postprocessing);
  report("label-format", label_format);
  report("reports", reports);
  report("annotate-determinism", annotate_determinism);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED")
            << fmt(" (%.1f s)", seconds_since(t0)) << std::endl;
  return failures == 0 ? 0 : 1;
}
