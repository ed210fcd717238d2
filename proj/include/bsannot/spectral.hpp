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
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsannot/audio.hpp"
#include "bsannot/classify.hpp"
#include "bsannot/error.hpp"
#include "bsannot/hash.hpp"
#include "bsannot/mel.hpp"
#include "bsannot/patterns.hpp"
#include "bsannot/rng.hpp"

namespace bsannot {

/// Linear softmax model over pooled, band-normalized log-mel statistics.
struct SpectralModel {
  static constexpr int kFormatVersion = 1;

  MelConfig mel;
  std::string cohort = "combined";
  std::vector<double> band_mean;  // per-band normalization
  std::vector<double> band_std;
  std::vector<double> feat_mean;  // feature standardization
  std::vector<double> feat_std;
  std::vector<std::array<double, 4>> weights;  // [feature][class]
  std::array<double, 4> bias{};

  std::size_t n_features() const { return feat_mean.size(); }
};

/// Band-normalized log-mel patch values, valid frames only.
inline std::vector<double> normalized_patch(const LogMel& patch, const std::vector<double>& mean,
                                            const std::vector<double>& std) {
  std::vector<double> z(patch.valid_frames * patch.n_bands);
  for (std::size_t f = 0; f < patch.valid_frames; ++f) {
    for (std::size_t m = 0; m < patch.n_bands; ++m) {
      z[f * patch.n_bands + m] = (patch.at(f, m) - mean[m]) / std[m];
    }
  }
  return z;
}

/// Per-band mean and std of the normalized patch plus log duration.
inline std::vector<double> pooled_features(const LogMel& patch, const std::vector<double>& mean,
                                           const std::vector<double>& std, double duration_s) {
  const auto z = normalized_patch(patch, mean, std);
  const std::size_t b = patch.n_bands;
  const auto v = static_cast<double>(patch.valid_frames);
  std::vector<double> out(2 * b + 1, 0.0);
  for (std::size_t f = 0; f < patch.valid_frames; ++f) {
    for (std::size_t m = 0; m < b; ++m) out[m] += z[f * b + m];
  }
  for (std::size_t m = 0; m < b; ++m) out[m] /= v;
  for (std::size_t f = 0; f < patch.valid_frames; ++f) {
    for (std::size_t m = 0; m < b; ++m) {
      const double d = z[f * b + m] - out[m];
      out[b + m] += d * d;
    }
  }
  for (std::size_t m = 0; m < b; ++m) out[b + m] = std::sqrt(out[b + m] / v);
  out[2 * b] = std::log(std::max(duration_s, 1e-6));
  return out;
}

inline std::array<double, 4> spectral_logits(const SpectralModel& model, const std::vector<double>& raw) {
  std::array<double, 4> z = model.bias;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double x = (raw[i] - model.feat_mean[i]) / model.feat_std[i];
    for (std::size_t c = 0; c < 4; ++c) z[c] += model.weights[i][c] * x;
  }
  return z;
}

inline ClassProbabilities spectral_classify(const SpectralModel& model, const AudioClip& segment) {
  if (segment.empty()) throw Error(Errc::kEmptySegment, "empty segment");
  const LogMel patch = mel_patch(segment, model.mel);
  const auto raw = pooled_features(patch, model.band_mean, model.band_std, segment.duration_s());
  return ClassProbabilities::from_logits(spectral_logits(model, raw));
}

inline nlohmann::json model_to_json(const SpectralModel& m) {
  nlohmann::json w = nlohmann::json::array();
  for (const auto& row : m.weights) w.push_back(row);
  return {{"format", "bsannot-spectral"},
          {"version", SpectralModel::kFormatVersion},
          {"cohort", m.cohort},
          {"mel", {{"n_mels", m.mel.n_mels}, {"win_ms", m.mel.win_ms}, {"hop_ms", m.mel.hop_ms},
                   {"fmin_hz", m.mel.fmin_hz}, {"fmax_hz", m.mel.fmax_hz}}},
          {"classes", {"SB", "MB", "CRS", "HS"}},
          {"band_mean", m.band_mean},
          {"band_std", m.band_std},
          {"feat_mean", m.feat_mean},
          {"feat_std", m.feat_std},
          {"weights", w},
          {"bias", m.bias}};
}

inline SpectralModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "bsannot-spectral" || j.at("version") != SpectralModel::kFormatVersion) {
      throw Error(Errc::kInvalidArgument, "not a version 1 spectral model");
    }
    SpectralModel m;
    m.cohort = j.at("cohort").get<std::string>();
    const auto& mel = j.at("mel");
    m.mel.n_mels = mel.at("n_mels").get<int>();
    m.mel.win_ms = mel.at("win_ms").get<int>();
    m.mel.hop_ms = mel.at("hop_ms").get<int>();
    m.mel.fmin_hz = mel.at("fmin_hz").get<double>();
    m.mel.fmax_hz = mel.at("fmax_hz").get<double>();
    m.band_mean = j.at("band_mean").get<std::vector<double>>();
    m.band_std = j.at("band_std").get<std::vector<double>>();
    m.feat_mean = j.at("feat_mean").get<std::vector<double>>();
    m.feat_std = j.at("feat_std").get<std::vector<double>>();
    m.weights = j.at("weights").get<std::vector<std::array<double, 4>>>();
    m.bias = j.at("bias").get<std::array<double, 4>>();
    const auto bands = static_cast<std::size_t>(m.mel.n_mels);
    if (m.band_mean.size() != bands || m.band_std.size() != bands ||
        m.feat_mean.size() != 2 * bands + 1 || m.feat_std.size() != m.feat_mean.size() ||
        m.weights.size() != m.feat_mean.size()) {
      throw Error(Errc::kInvalidArgument, "model dimensions do not match its mel configuration");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("bad model file: ") + e.what());
  }
}

/// Content hash of the serialized model, stable across save and load.
inline std::string model_id(const SpectralModel& m) {
  return "spectral-" + m.cohort + "-" + hex64(fnv1a64(model_to_json(m).dump()));
}

inline void save_model(const std::string& path, const SpectralModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIo, "cannot write " + path);
  out << model_to_json(m).dump(1) << '\n';
  if (!out) throw Error(Errc::kIo, "cannot write " + path);
}

inline SpectralModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path);
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::kInvalidArgument, path + ": " + e.what());
  }
}

class SpectralClassifier : public Classifier {
 public:
  explicit SpectralClassifier(SpectralModel model) : model_(std::move(model)), id_(model_id(model_)) {}
  std::string id() const override { return id_; }
  const SpectralModel& model() const { return model_; }

  ClassProbabilities classify(const AudioClip& clip, const EventInterval& event,
                              const ClipContext&) override {
    return spectral_classify(model_, slice(clip, event.start_s, std::min(event.end_s, clip.duration_s())));
  }

 private:
  SpectralModel model_;
  std::string id_;
};

/// One annotated recording channel of one subject.
struct TrainingItem {
  std::string subject;
  AudioClip clip;
  LabelTrack track;
};

struct TrainOptions {
  std::uint64_t seed = 1;
  int epochs = 400;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  double train_fraction = 0.70;
  double validation_fraction = 0.15;
};

struct SubjectSplit {
  std::vector<std::string> train, validation, test;
};

struct TrainResult {
  SpectralModel model;
  std::string id;
  SubjectSplit split;
  std::size_t train_segments = 0, validation_segments = 0, test_segments = 0;
  std::optional<double> validation_accuracy;
  std::optional<double> test_accuracy;
};

/// Subject-level split stratified by each subject's most frequent label:
/// within each stratum, shuffled subjects are dealt 70/15/15.
inline SubjectSplit split_subjects(const std::map<std::string, std::array<std::size_t, 4>>& counts,
                                   const TrainOptions& opts) {
  if (counts.size() < 3) {
    throw Error(Errc::kInvalidArgument, "a subject-level split needs at least 3 subjects");
  }
  std::map<std::size_t, std::vector<std::string>> strata;
  for (const auto& [subject, c] : counts) {
    const auto dominant = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
    strata[dominant].push_back(subject);
  }
  Rng rng(opts.seed);
  SubjectSplit out;
  for (auto& [label, subjects] : strata) {
    for (std::size_t i = subjects.size(); i > 1; --i) {
      std::swap(subjects[i - 1], subjects[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
    }
    const auto g = static_cast<double>(subjects.size());
    const auto n_train = static_cast<std::size_t>(std::lround(opts.train_fraction * g));
    const auto n_val = static_cast<std::size_t>(std::lround(opts.validation_fraction * g));
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      auto& dst = i < n_train ? out.train : i < n_train + n_val ? out.validation : out.test;
      dst.push_back(subjects[i]);
    }
  }
  // Small strata round to nothing; keep every partition populated.
  auto borrow = [&](std::vector<std::string>& dst) {
    if (!dst.empty() || out.train.size() < 2) return;
    dst.push_back(out.train.back());
    out.train.pop_back();
  };
  borrow(out.validation);
  borrow(out.test);
  for (auto* v : {&out.train, &out.validation, &out.test}) std::sort(v->begin(), v->end());
  return out;
}

/// Trains the spectral backend on every non-None segment of the corpus.
inline TrainResult train_spectral(const std::vector<TrainingItem>& corpus, const std::string& cohort,
                                  const MelConfig& mel = {}, const TrainOptions& opts = {}) {
  struct Example {
    std::string subject;
    std::size_t label;
    LogMel patch;
    double duration_s;
  };
  std::vector<Example> examples;
  std::map<std::string, std::array<std::size_t, 4>> counts;
  std::set<std::size_t> classes;
  for (const TrainingItem& item : corpus) {
    for (const Segment& s : item.track.segments()) {
      if (s.label() == PatternLabel::kNone) continue;
      const int fs = item.clip.sample_rate();
      const std::size_t i0 = time_to_index(s.start_s(), fs);
      const std::size_t i1 = std::min(time_to_index(s.end_s(), fs), item.clip.size());
      if (i1 <= i0) {
        throw Error(Errc::kEmptySegment, "segment at " + std::to_string(s.start_s()) + " s of subject " +
                                             item.subject + " holds no samples");
      }
      const AudioClip seg = slice(item.clip, s.start_s(), std::min(s.end_s(), item.clip.duration_s()));
      const auto label = static_cast<std::size_t>(s.label());
      examples.push_back({item.subject, label, mel_patch(seg, mel), s.duration_s()});
      ++counts[item.subject][label];
      classes.insert(label);
    }
  }
  if (classes.size() < 2) throw Error(Errc::kSingleClass, "training needs at least two classes");

  TrainResult result;
  result.split = split_subjects(counts, opts);
  const std::set<std::string> train_set(result.split.train.begin(), result.split.train.end());
  const std::set<std::string> val_set(result.split.validation.begin(), result.split.validation.end());

  SpectralModel& model = result.model;
  model.mel = mel;
  model.cohort = cohort;
  const auto bands = static_cast<std::size_t>(mel.n_mels);

  // Band statistics over the valid frames of training segments.
  std::vector<double> sum(bands, 0.0), sq(bands, 0.0);
  double frames = 0.0;
  for (const Example& e : examples) {
    if (!train_set.count(e.subject)) continue;
    for (std::size_t f = 0; f < e.patch.valid_frames; ++f) {
      for (std::size_t m = 0; m < bands; ++m) sum[m] += e.patch.at(f, m);
    }
    frames += static_cast<double>(e.patch.valid_frames);
  }
  if (frames == 0.0) throw Error(Errc::kInvalidArgument, "training partition is empty");
  model.band_mean.resize(bands);
  model.band_std.resize(bands);
  for (std::size_t m = 0; m < bands; ++m) model.band_mean[m] = sum[m] / frames;
  for (const Example& e : examples) {
    if (!train_set.count(e.subject)) continue;
    for (std::size_t f = 0; f < e.patch.valid_frames; ++f) {
      for (std::size_t m = 0; m < bands; ++m) {
        const double d = e.patch.at(f, m) - model.band_mean[m];
        sq[m] += d * d;
      }
    }
  }
  for (std::size_t m = 0; m < bands; ++m) {
    const double s = std::sqrt(sq[m] / frames);
    model.band_std[m] = s > 1e-12 ? s : 1.0;
  }

  std::vector<std::vector<double>> feats;
  for (const Example& e : examples) {
    feats.push_back(pooled_features(e.patch, model.band_mean, model.band_std, e.duration_s));
  }
  const std::size_t dim = 2 * bands + 1;
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (train_set.count(examples[i].subject)) train_idx.push_back(i);
  }
  model.feat_mean.assign(dim, 0.0);
  model.feat_std.assign(dim, 0.0);
  for (std::size_t i : train_idx) {
    for (std::size_t d = 0; d < dim; ++d) model.feat_mean[d] += feats[i][d];
  }
  for (double& v : model.feat_mean) v /= static_cast<double>(train_idx.size());
  for (std::size_t i : train_idx) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double x = feats[i][d] - model.feat_mean[d];
      model.feat_std[d] += x * x;
    }
  }
  for (double& v : model.feat_std) {
    v = std::sqrt(v / static_cast<double>(train_idx.size()));
    if (!(v > 1e-12)) v = 1.0;
  }

  // Full-batch gradient descent on class-balanced cross-entropy.
  std::array<double, 4> class_n{};
  for (std::size_t i : train_idx) class_n[examples[i].label] += 1.0;
  std::array<double, 4> class_w{};
  double present = 0.0;
  for (double c : class_n) present += c > 0.0 ? 1.0 : 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    class_w[c] = class_n[c] > 0.0 ? static_cast<double>(train_idx.size()) / (present * class_n[c]) : 0.0;
  }
  std::vector<std::vector<double>> x(train_idx.size(), std::vector<double>(dim));
  for (std::size_t r = 0; r < train_idx.size(); ++r) {
    for (std::size_t d = 0; d < dim; ++d) {
      x[r][d] = (feats[train_idx[r]][d] - model.feat_mean[d]) / model.feat_std[d];
    }
  }
  model.weights.assign(dim, {0.0, 0.0, 0.0, 0.0});
  model.bias = {0.0, 0.0, 0.0, 0.0};
  const double inv_n = 1.0 / static_cast<double>(train_idx.size());
  std::vector<std::array<double, 4>> grad(dim);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), std::array<double, 4>{});
    std::array<double, 4> grad_b{};
    for (std::size_t r = 0; r < x.size(); ++r) {
      std::array<double, 4> z = model.bias;
      for (std::size_t d = 0; d < dim; ++d) {
        for (std::size_t c = 0; c < 4; ++c) z[c] += model.weights[d][c] * x[r][d];
      }
      const double mz = *std::max_element(z.begin(), z.end());
      double zs = 0.0;
      for (double& v : z) zs += v = std::exp(v - mz);
      const std::size_t y = examples[train_idx[r]].label;
      const double w = class_w[y] * inv_n;
      for (std::size_t c = 0; c < 4; ++c) {
        const double g = w * (z[c] / zs - (c == y ? 1.0 : 0.0));
        grad_b[c] += g;
        for (std::size_t d = 0; d < dim; ++d) grad[d][c] += g * x[r][d];
      }
    }
    for (std::size_t c = 0; c < 4; ++c) model.bias[c] -= opts.learning_rate * grad_b[c];
    for (std::size_t d = 0; d < dim; ++d) {
      for (std::size_t c = 0; c < 4; ++c) {
        model.weights[d][c] -= opts.learning_rate * (grad[d][c] + opts.l2 * model.weights[d][c]);
      }
    }
  }

  auto accuracy = [&](const std::set<std::string>& subjects, std::size_t& count) -> std::optional<double> {
    std::size_t hit = 0;
    count = 0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (!subjects.count(examples[i].subject)) continue;
      ++count;
      const auto p = ClassProbabilities::from_logits(spectral_logits(model, feats[i]));
      hit += static_cast<std::size_t>(p.argmax()) == examples[i].label;
    }
    if (count == 0) return std::nullopt;
    return static_cast<double>(hit) / static_cast<double>(count);
  };
  const std::set<std::string> test_set(result.split.test.begin(), result.split.test.end());
  result.train_segments = train_idx.size();
  result.validation_accuracy = accuracy(val_set, result.validation_segments);
  result.test_accuracy = accuracy(test_set, result.test_segments);
  result.id = model_id(model);
  return result;
}

}  // namespace bsannot
