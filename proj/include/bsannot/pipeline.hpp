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
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bsannot/audio.hpp"
#include "bsannot/classify.hpp"
#include "bsannot/detect.hpp"
#include "bsannot/error.hpp"
#include "bsannot/evalstats.hpp"
#include "bsannot/external.hpp"
#include "bsannot/hash.hpp"
#include "bsannot/mel.hpp"
#include "bsannot/patterns.hpp"
#include "bsannot/postproc.hpp"
#include "bsannot/spectral.hpp"
#include "bsannot/synth.hpp"
#include "bsannot/wav.hpp"

#ifndef BSANNOT_VERSION
#define BSANNOT_VERSION "0.0.0"
#endif

namespace bsannot {

inline constexpr const char* kVersion = BSANNOT_VERSION;

enum class Backend { kRule, kSpectral, kExternal };

inline std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kRule: return "rule";
    case Backend::kSpectral: return "spectral";
    case Backend::kExternal: return "external";
  }
  return "?";
}

inline Backend parse_backend(std::string_view name) {
  if (name == "rule") return Backend::kRule;
  if (name == "spectral") return Backend::kSpectral;
  if (name == "external") return Backend::kExternal;
  throw Error(Errc::kInvalidArgument, "unknown backend '" + std::string(name) + "'");
}

/// Everything that influences annotate output. Spectral models are named in
/// `models` (key -> file) and routed per cohort by `selector`; an empty
/// selector entry means "use combined", and an empty combined entry means
/// the model keyed "combined" (or the only model).
struct PipelineConfig {
  DetectorConfig detector;
  FeatureConfig features;
  PostprocConfig postproc;
  MelConfig mel;
  RuleConfig rule;
  Backend backend = Backend::kRule;
  std::string adapter;
  double adapter_timeout_s = 10.0;
  std::map<std::string, std::string> models;
  CohortModelSelector selector{"", "", ""};
  Cohort cohort = Cohort::kUnknown;
  bool fallback_to_rule = true;

  void validate() const {
    detector.validate();
    postproc.validate();
    if (features.stft_win_ms < 1 || features.smooth_frames < 1 || features.smooth_frames % 2 == 0) {
      throw Error(Errc::kInvalidArgument, "features: stft_win_ms >= 1 and an odd smooth_frames are required");
    }
    if (mel.n_mels < 1 || mel.win_ms < 1 || mel.hop_ms < 1) {
      throw Error(Errc::kInvalidArgument, "mel: n_mels, win_ms and hop_ms must be positive");
    }
    if (backend == Backend::kExternal && adapter.empty()) {
      throw Error(Errc::kInvalidArgument, "external backend needs an adapter address");
    }
    if (!(adapter_timeout_s > 0.0)) throw Error(Errc::kInvalidArgument, "adapter_timeout_s must be positive");
    if (backend == Backend::kSpectral) {
      if (models.empty()) throw Error(Errc::kInvalidArgument, "spectral backend needs at least one model");
      for (Cohort c : {Cohort::kHealthy, Cohort::kPatient, Cohort::kUnknown}) {
        if (!models.contains(model_key(c))) {
          throw Error(Errc::kInvalidArgument, "selector for " + std::string(cohort_name(c)) +
                                                  " names no configured model");
        }
      }
    }
  }

  /// Registry key used for a cohort.
  std::string model_key(Cohort c) const {
    switch (backend) {
      case Backend::kRule: return "rule";
      case Backend::kExternal: return "external";
      case Backend::kSpectral: break;
    }
    std::string key = selector.select(c);
    if (key.empty()) key = selector.combined;
    if (key.empty() && models.contains("combined")) key = "combined";
    if (key.empty() && models.size() == 1) key = models.begin()->first;
    return key;
  }
};

namespace pipeline_detail {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* n) { return k == n; }) == known.end()) {
      throw Error(Errc::kInvalidArgument, where + ": unknown key '" + k + "'");
    }
  }
}

}  // namespace pipeline_detail

inline nlohmann::json to_json(const PipelineConfig& c) {
  const auto& d = c.detector;
  const auto& r = c.rule;
  return {
      {"v", 1},
      {"detector", {{"min_event_ms", d.min_event_ms}, {"hangover_frames", d.hangover_frames},
                    {"onset_rms_margin_db", d.onset_rms_margin_db}, {"energy_margin_db", d.energy_margin_db},
                    {"bridge_gap_ms", d.bridge_gap_ms}}},
      {"features", {{"stft_win_ms", c.features.stft_win_ms}, {"smooth_frames", c.features.smooth_frames},
                    {"floor_db", c.features.floor_db}}},
      {"postproc", {{"gap_fill_min_ms", c.postproc.gap_fill_min_ms},
                    {"merge_max_gap_ms", c.postproc.merge_max_gap_ms},
                    {"fill_label", label_name(c.postproc.fill_label)}}},
      {"mel", {{"n_mels", c.mel.n_mels}, {"win_ms", c.mel.win_ms}, {"hop_ms", c.mel.hop_ms},
               {"fmin_hz", c.mel.fmin_hz}, {"fmax_hz", c.mel.fmax_hz}}},
      {"rule", {{"harmonic_window_ms", r.harmonic_window_ms}, {"harmonic_hop_ms", r.harmonic_hop_ms},
                {"harmonic_sustain_ms", r.harmonic_sustain_ms}, {"harmonic_min_peaks", r.harmonic_min_peaks},
                {"peak_prominence_db", r.peak_prominence_db}, {"peak_floor_db", r.peak_floor_db},
                {"sb_max_ms", r.sb_max_ms}, {"crs_min_ms", r.crs_min_ms}, {"gap_min_ms", r.gap_min_ms},
                {"envelope_frames", r.envelope_frames}, {"silence_factor", r.silence_factor},
                {"winner_prob", r.winner_prob}}},
      {"backend", backend_name(c.backend)},
      {"adapter", c.adapter},
      {"adapter_timeout_s", c.adapter_timeout_s},
      {"models", c.models},
      {"selector", {{"healthy", c.selector.healthy}, {"patient", c.selector.patient},
                    {"combined", c.selector.combined}}},
      {"cohort", cohort_name(c.cohort)},
      {"fallback_to_rule", c.fallback_to_rule},
  };
}

/// Applies the keys present in `j` on top of `base`. Unknown keys are errors
/// so that typos do not silently fall back to defaults.
inline PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {}) {
  using namespace pipeline_detail;
  try {
    if (!j.is_object()) throw Error(Errc::kInvalidArgument, "config must be a JSON object");
    reject_unknown(j, {"v", "detector", "features", "postproc", "mel", "rule", "backend", "adapter",
                       "adapter_timeout_s", "models", "selector", "cohort", "fallback_to_rule"},
                   "config");
    if (j.contains("v") && j.at("v") != 1) throw Error(Errc::kInvalidArgument, "unsupported config version");
    PipelineConfig c = std::move(base);
    if (j.contains("detector")) {
      const auto& d = j.at("detector");
      reject_unknown(d, {"min_event_ms", "hangover_frames", "onset_rms_margin_db", "energy_margin_db",
                         "bridge_gap_ms"}, "detector");
      read(d, "min_event_ms", c.detector.min_event_ms);
      read(d, "hangover_frames", c.detector.hangover_frames);
      read(d, "onset_rms_margin_db", c.detector.onset_rms_margin_db);
      read(d, "energy_margin_db", c.detector.energy_margin_db);
      read(d, "bridge_gap_ms", c.detector.bridge_gap_ms);
    }
    if (j.contains("features")) {
      const auto& f = j.at("features");
      reject_unknown(f, {"stft_win_ms", "smooth_frames", "floor_db"}, "features");
      read(f, "stft_win_ms", c.features.stft_win_ms);
      read(f, "smooth_frames", c.features.smooth_frames);
      read(f, "floor_db", c.features.floor_db);
    }
    if (j.contains("postproc")) {
      const auto& p = j.at("postproc");
      reject_unknown(p, {"gap_fill_min_ms", "merge_max_gap_ms", "fill_label"}, "postproc");
      read(p, "gap_fill_min_ms", c.postproc.gap_fill_min_ms);
      read(p, "merge_max_gap_ms", c.postproc.merge_max_gap_ms);
      if (p.contains("fill_label")) c.postproc.fill_label = parse_label(p.at("fill_label").get<std::string>());
    }
    if (j.contains("mel")) {
      const auto& m = j.at("mel");
      reject_unknown(m, {"n_mels", "win_ms", "hop_ms", "fmin_hz", "fmax_hz"}, "mel");
      read(m, "n_mels", c.mel.n_mels);
      read(m, "win_ms", c.mel.win_ms);
      read(m, "hop_ms", c.mel.hop_ms);
      read(m, "fmin_hz", c.mel.fmin_hz);
      read(m, "fmax_hz", c.mel.fmax_hz);
    }
    if (j.contains("rule")) {
      const auto& r = j.at("rule");
      reject_unknown(r, {"harmonic_window_ms", "harmonic_hop_ms", "harmonic_sustain_ms", "harmonic_min_peaks",
                         "peak_prominence_db", "peak_floor_db", "sb_max_ms", "crs_min_ms", "gap_min_ms",
                         "envelope_frames", "silence_factor", "winner_prob"}, "rule");
      read(r, "harmonic_window_ms", c.rule.harmonic_window_ms);
      read(r, "harmonic_hop_ms", c.rule.harmonic_hop_ms);
      read(r, "harmonic_sustain_ms", c.rule.harmonic_sustain_ms);
      read(r, "harmonic_min_peaks", c.rule.harmonic_min_peaks);
      read(r, "peak_prominence_db", c.rule.peak_prominence_db);
      read(r, "peak_floor_db", c.rule.peak_floor_db);
      read(r, "sb_max_ms", c.rule.sb_max_ms);
      read(r, "crs_min_ms", c.rule.crs_min_ms);
      read(r, "gap_min_ms", c.rule.gap_min_ms);
      read(r, "envelope_frames", c.rule.envelope_frames);
      read(r, "silence_factor", c.rule.silence_factor);
      read(r, "winner_prob", c.rule.winner_prob);
    }
    if (j.contains("backend")) c.backend = parse_backend(j.at("backend").get<std::string>());
    read(j, "adapter", c.adapter);
    read(j, "adapter_timeout_s", c.adapter_timeout_s);
    if (j.contains("models")) c.models = j.at("models").get<std::map<std::string, std::string>>();
    if (j.contains("selector")) {
      const auto& s = j.at("selector");
      reject_unknown(s, {"healthy", "patient", "combined"}, "selector");
      read(s, "healthy", c.selector.healthy);
      read(s, "patient", c.selector.patient);
      read(s, "combined", c.selector.combined);
    }
    if (j.contains("cohort")) c.cohort = parse_cohort(j.at("cohort").get<std::string>());
    read(j, "fallback_to_rule", c.fallback_to_rule);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("config: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::kInvalidArgument, path.string() + ": " + e.what());
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::kIo, "short write to " + path.string());
}

/// Hash of the canonical (key-sorted) config JSON.
inline std::string config_hash(const PipelineConfig& c) { return hex64(fnv1a64(to_json(c).dump())); }

/// Label file name for one channel of a recording.
inline std::string labels_file_name(const std::string& stem, Quadrant q) {
  return stem + "." + std::string(quadrant_name(q)) + ".labels.txt";
}

/// Classifiers for a validated config. Relative model paths resolve
/// against `base_dir`.
inline ModelRegistry build_registry(const PipelineConfig& cfg, const std::filesystem::path& base_dir = {}) {
  ModelRegistry reg;
  reg["rule"] = std::make_shared<RuleClassifier>(cfg.rule);
  if (cfg.backend == Backend::kExternal) {
    const auto ms = std::chrono::milliseconds(static_cast<std::int64_t>(cfg.adapter_timeout_s * 1000.0));
    reg["external"] = std::make_shared<ExternalClassifier>(std::make_shared<ExternalAdapter>(cfg.adapter, ms));
  }
  if (cfg.backend == Backend::kSpectral) {
    for (const auto& [key, file] : cfg.models) {
      std::filesystem::path p(file);
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      reg[key] = std::make_shared<SpectralClassifier>(load_model(p.string()));
    }
  }
  return reg;
}

struct ChannelResult {
  Quadrant quadrant = Quadrant::kRUQ;
  std::optional<LabelTrack> track;  // refined; absent when the channel failed
  std::size_t events = 0;
  std::size_t fallbacks = 0;
  std::vector<EventFailure> failures;
  std::optional<Errc> error;
  std::string message;
  std::string model_id;
  double detect_ms = 0.0;
  double classify_ms = 0.0;

  bool ok() const { return !error && failures.empty(); }
};

/// detect -> classify -> refine for one channel. Errors are captured, not thrown.
inline ChannelResult annotate_channel(const AudioClip& clip, Quadrant q, const PipelineConfig& cfg,
                                      const ModelRegistry& models) {
  using Ms = std::chrono::duration<double, std::milli>;
  ChannelResult r;
  r.quadrant = q;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const auto events = detect_clip(clip, cfg.detector, cfg.features);
    const auto t1 = std::chrono::steady_clock::now();
    ClassifyOptions opts;
    opts.fallback_to_rule = cfg.fallback_to_rule;
    opts.rule = cfg.rule;
    opts.source = TrackSource::kAuto;
    CohortModelSelector sel;
    sel.healthy = cfg.model_key(Cohort::kHealthy);
    sel.patient = cfg.model_key(Cohort::kPatient);
    sel.combined = cfg.model_key(Cohort::kUnknown);
    auto classified = classify_track(clip, events, models, sel, cfg.cohort, opts);
    const auto t2 = std::chrono::steady_clock::now();
    r.events = events.size();
    r.fallbacks = classified.fallbacks;
    r.failures = std::move(classified.failures);
    r.model_id = models.at(classified.model_id)->id();
    r.track = refine(classified.track, clip.duration_s(), cfg.postproc);
    r.detect_ms = Ms(t1 - t0).count();
    r.classify_ms = Ms(t2 - t1).count();
  } catch (const Error& e) {
    r.error = e.code();
    r.message = std::string(quadrant_name(q)) + ": " + e.what();
  }
  return r;
}

struct AnnotateOptions {
  int jobs = 1;
  bool keep_going = false;
  std::filesystem::path config_dir;  // for relative model paths
};

struct AnnotateResult {
  std::vector<ChannelResult> channels;  // quadrant order
  std::vector<std::filesystem::path> written;
  nlohmann::json manifest;
  bool failed = false;
};

/// Runs every channel of `input` and writes <stem>.<QUAD>.labels.txt plus
/// <stem>.manifest.json into out_dir. Channels run on up to `jobs` threads;
/// files are written afterwards in quadrant order. Everything in the
/// manifest except "timings" is a pure function of inputs and config.
inline AnnotateResult annotate(const std::filesystem::path& input, const PipelineConfig& cfg,
                               const std::filesystem::path& out_dir, const AnnotateOptions& opts = {}) {
  using Ms = std::chrono::duration<double, std::milli>;
  const auto t_start = std::chrono::steady_clock::now();
  cfg.validate();
  if (opts.jobs < 1) throw Error(Errc::kInvalidArgument, "--jobs must be >= 1");
  const std::string bytes = read_text_file(input);
  if (bytes.empty()) throw Error(Errc::kZeroLength, input.string() + " is empty");
  const Recording rec = decode_wav(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
  const ModelRegistry models = build_registry(cfg, opts.config_dir);

  std::vector<std::pair<Quadrant, const AudioClip*>> work;
  for (const auto& [q, clip] : rec.channels()) work.emplace_back(q, &clip);
  AnnotateResult result;
  result.channels.resize(work.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      result.channels[i] = annotate_channel(*work[i].second, work[i].first, cfg, models);
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(opts.jobs), work.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  const std::string stem = input.stem().string();
  nlohmann::json channels = nlohmann::json::object();
  nlohmann::json timings = {{"channels", nlohmann::json::object()}};
  for (const ChannelResult& r : result.channels) {
    const std::string qn(quadrant_name(r.quadrant));
    nlohmann::json c = {{"events", r.events}, {"fallbacks", r.fallbacks}, {"model_id", r.model_id}};
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : r.failures) {
      failures.push_back({{"event", f.index}, {"code", errc_name(f.code)}, {"message", f.message}});
    }
    c["failures"] = std::move(failures);
    if (r.error) c["error"] = {{"code", errc_name(*r.error)}, {"message", r.message}};
    if (!r.ok()) result.failed = true;
    if (r.track && (r.failures.empty() || opts.keep_going)) {
      const std::string name = labels_file_name(stem, r.quadrant);
      const std::string text = write_label_track(*r.track);
      write_text_file(out_dir / name, text);
      result.written.push_back(out_dir / name);
      c["file"] = name;
      c["segments"] = r.track->size();
      c["labels_fnv1a64"] = hex64(fnv1a64(text));
      nlohmann::json counts = nlohmann::json::object();
      for (PatternLabel l : kAllLabels) counts[std::string(label_name(l))] = r.track->count(l);
      c["label_counts"] = std::move(counts);
    }
    channels[qn] = std::move(c);
    timings["channels"][qn] = {{"detect_ms", r.detect_ms}, {"classify_ms", r.classify_ms}};
  }
  timings["total_ms"] = Ms(std::chrono::steady_clock::now() - t_start).count();
  result.manifest = {{"v", 1},
                     {"tool", "bsannot"},
                     {"version", kVersion},
                     {"input", input.filename().string()},
                     {"input_fnv1a64", hex64(fnv1a64(bytes))},
                     {"sample_rate", rec.sample_rate()},
                     {"duration_s", rec.channels().begin()->second.duration_s()},
                     {"config", to_json(cfg)},
                     {"config_hash", config_hash(cfg)},
                     {"channels", std::move(channels)},
                     {"ok", !result.failed},
                     {"timings", std::move(timings)}};
  const auto manifest_path = out_dir / (stem + ".manifest.json");
  write_text_file(manifest_path, result.manifest.dump(2) + "\n");
  result.written.push_back(manifest_path);
  return result;
}

/// Loads a label file, prefixing errors with the file name.
inline LabelTrack load_label_file(const std::filesystem::path& path, TrackSource source = TrackSource::kManual) {
  const std::string text = read_text_file(path);
  try {
    return parse_label_track(text, source);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

struct EvalOptions {
  AgreementConfig agreement;
  std::optional<double> span_s;
  bool adjustment = false;  // also treat ref as auto and cand as expert
  int histogram_bin_ms = 10;
};

/// Compares two label files and writes agreement.json, distribution.json,
/// distribution.csv, confusion.csv and durations.csv (plus adjustment.*
/// when asked) into out_dir. Returns the combined JSON.
inline nlohmann::json evaluate(const std::filesystem::path& ref_path, const std::filesystem::path& cand_path,
                               const std::filesystem::path& out_dir, const EvalOptions& opts = {}) {
  const LabelTrack ref = load_label_file(ref_path, TrackSource::kManual);
  const LabelTrack cand = load_label_file(cand_path, TrackSource::kPredicted);
  AgreementConfig ac = opts.agreement;
  if (opts.span_s) ac.span_s = opts.span_s;
  const AgreementReport agree = agreement(ref, cand, ac);
  const auto d_ref = distribution(ref, ReportGroup::kOriginal);
  const auto d_cand = distribution(cand, ReportGroup::kPredicted);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  nlohmann::json out = {{"v", 1},
                        {"reference", ref_path.filename().string()},
                        {"candidate", cand_path.filename().string()},
                        {"agreement", to_json(agree)},
                        {"distributions", {to_json(d_ref), to_json(d_cand)}}};
  write_text_file(out_dir / "agreement.json", to_json(agree).dump(2) + "\n");
  write_text_file(out_dir / "distribution.json", out["distributions"].dump(2) + "\n");
  std::ostringstream dist_csv, conf_csv, hist_csv;
  write_csv(dist_csv, std::vector<DistributionReport>{d_ref, d_cand});
  write_csv(conf_csv, agree);
  write_duration_histogram(hist_csv, {{ReportGroup::kOriginal, ref}, {ReportGroup::kPredicted, cand}},
                           opts.histogram_bin_ms);
  write_text_file(out_dir / "distribution.csv", dist_csv.str());
  write_text_file(out_dir / "confusion.csv", conf_csv.str());
  write_text_file(out_dir / "durations.csv", hist_csv.str());
  if (opts.adjustment) {
    AdjustmentOptions ao;
    ao.min_iou = ac.min_iou;
    ao.span_s = opts.span_s;
    const auto adj = adjustment_report(ref, cand, ao);
    out["adjustment"] = to_json(adj);
    write_text_file(out_dir / "adjustment.json", out["adjustment"].dump(2) + "\n");
    std::ostringstream adj_csv;
    write_csv(adj_csv, adj);
    write_text_file(out_dir / "adjustment.csv", adj_csv.str());
  }
  return out;
}

/// Renders a synthesis script into <stem>.wav and one ground-truth label
/// file per channel. The stem defaults to the script's file stem.
inline std::vector<std::filesystem::path> synthesize(const std::filesystem::path& script_path,
                                                     const std::filesystem::path& out_dir,
                                                     std::string stem = {}) {
  const SynthScript script = script_from_json(read_json_file(script_path));
  if (stem.empty()) stem = script_path.stem().string();
  const RenderedScript rendered = render(script);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  written.push_back(out_dir / (stem + ".wav"));
  write_wav(written.back(), rendered.recording, SampleFormat::kFloat32);
  for (const auto& [q, track] : rendered.truth) {
    written.push_back(out_dir / labels_file_name(stem, q));
    write_text_file(written.back(), write_label_track(track));
  }
  return written;
}

}  // namespace bsannot
