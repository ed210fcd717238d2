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

#include <filesystem>

#include <gtest/gtest.h>

#include "bsannot/pipeline.hpp"

namespace bsannot {
namespace {

using nlohmann::json;

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("bsannot_pipeline_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

SynthScript two_channel_script() {
  SynthScript s;
  s.seed = 9;
  s.duration_s = 6.0;
  s.channels = 2;
  s.events.push_back({0.5, SbParams{20.0, 300.0}, 30.0, Quadrant::kRUQ});
  s.events.push_back({1.5, MbParams{{{15.0, 400.0}, {20.0, 350.0}, {15.0, 500.0}}, {60.0, 80.0}}, 30.0, Quadrant::kRUQ});
  s.events.push_back({3.0, CrsParams{}, 35.0, Quadrant::kRUQ});
  s.events.push_back({1.0, HsParams{}, 30.0, Quadrant::kLUQ});
  s.events.push_back({4.0, SbParams{25.0, 250.0}, 30.0, Quadrant::kLUQ});
  return s;
}

TEST(PipelineConfig, DefaultsRoundTripThroughJson) {
  const PipelineConfig c;
  EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
  EXPECT_EQ(config_hash(c), config_hash(config_from_json(json::object())));
}

TEST(PipelineConfig, OverridesAndHash) {
  const json j = {{"detector", {{"bridge_gap_ms", 100}}}, {"postproc", {{"fill_label", "None"}}}, {"cohort", "patient"}};
  const auto c = config_from_json(j);
  EXPECT_EQ(c.detector.bridge_gap_ms, 100);
  EXPECT_EQ(c.cohort, Cohort::kPatient);
  EXPECT_NE(config_hash(c), config_hash(PipelineConfig{}));
}

TEST(PipelineConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config_from_json({{"detectr", json::object()}}), Error);
  EXPECT_THROW(config_from_json({{"detector", {{"min_event", 3}}}}), Error);
  EXPECT_THROW(config_from_json({{"backend", "neural"}}), Error);
  EXPECT_THROW(config_from_json({{"cohort", "elderly"}}), Error);
  EXPECT_THROW(config_from_json({{"detector", {{"min_event_ms", "five"}}}}), Error);
  EXPECT_THROW(config_from_json({{"v", 2}}), Error);
}

TEST(PipelineConfig, BackendValidation) {
  PipelineConfig c;
  c.backend = Backend::kExternal;
  EXPECT_THROW(c.validate(), Error);
  c.adapter = "tcp:127.0.0.1:9";
  EXPECT_NO_THROW(c.validate());
  c.backend = Backend::kSpectral;
  EXPECT_THROW(c.validate(), Error);
  c.models = {{"combined", "m.json"}};
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.model_key(Cohort::kPatient), "combined");
  c.models["patient"] = "p.json";
  c.selector.patient = "patient";
  EXPECT_EQ(c.model_key(Cohort::kPatient), "patient");
  EXPECT_EQ(c.model_key(Cohort::kHealthy), "combined");
  c.selector.healthy = "missing";
  EXPECT_THROW(c.validate(), Error);
}

TEST(Annotate, WritesLabelsAndManifest) {
  const auto dir = scratch("writes");
  const auto rendered = render(two_channel_script());
  write_wav(dir / "in.wav", rendered.recording);
  AnnotateOptions opts;
  opts.jobs = 2;
  const auto r = annotate(dir / "in.wav", PipelineConfig{}, dir / "out", opts);
  EXPECT_FALSE(r.failed);
  for (Quadrant q : {Quadrant::kRUQ, Quadrant::kLUQ}) {
    const auto path = dir / "out" / labels_file_name("in", q);
    ASSERT_TRUE(std::filesystem::exists(path));
    const auto track = load_label_file(path);
    const auto a = agreement(rendered.truth.at(q), track, {.min_iou = 0.3, .span_s = 6.0});
    EXPECT_EQ(a.missed, 0u) << quadrant_name(q);
    EXPECT_EQ(a.spurious, 0u) << quadrant_name(q);
    for (const auto& p : a.pairs) {
      EXPECT_EQ(rendered.truth.at(q).events()[p.reference].label(), track.events()[p.candidate].label());
    }
  }
  const auto m = read_json_file(dir / "out" / "in.manifest.json");
  EXPECT_EQ(m["config_hash"], config_hash(PipelineConfig{}));
  EXPECT_EQ(m["version"], kVersion);
  EXPECT_EQ(m["channels"]["RUQ"]["model_id"], "rule");
  EXPECT_TRUE(m["timings"].contains("total_ms"));
}

TEST(Annotate, DeterministicAcrossRunsAndJobCounts) {
  const auto dir = scratch("determinism");
  write_wav(dir / "in.wav", render(two_channel_script()).recording);
  AnnotateOptions one, four;
  four.jobs = 4;
  auto a = annotate(dir / "in.wav", PipelineConfig{}, dir / "a", one).manifest;
  auto b = annotate(dir / "in.wav", PipelineConfig{}, dir / "b", four).manifest;
  a.erase("timings");
  b.erase("timings");
  EXPECT_EQ(a, b);
  for (Quadrant q : {Quadrant::kRUQ, Quadrant::kLUQ}) {
    EXPECT_EQ(read_text_file(dir / "a" / labels_file_name("in", q)),
              read_text_file(dir / "b" / labels_file_name("in", q)));
  }
}

TEST(Annotate, FailingChannelIsIsolated) {
  const auto dir = scratch("failing");
  auto rendered = render(two_channel_script());
  std::map<Quadrant, AudioClip> chans = rendered.recording.channels();
  chans.at(Quadrant::kLUQ) = AudioClip(std::vector<double>(chans.at(Quadrant::kLUQ).size(), 0.0), 8000);
  write_wav(dir / "in.wav", Recording(chans));
  const auto r = annotate(dir / "in.wav", PipelineConfig{}, dir / "out");
  EXPECT_TRUE(r.failed);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / labels_file_name("in", Quadrant::kRUQ)));
  EXPECT_FALSE(std::filesystem::exists(dir / "out" / labels_file_name("in", Quadrant::kLUQ)));
  EXPECT_TRUE(r.manifest["channels"]["LUQ"].contains("error"));
  EXPECT_FALSE(r.manifest["ok"].get<bool>());
}

TEST(Annotate, UnreachableAdapterFallsBackToRules) {
  const auto dir = scratch("fallback");
  write_wav(dir / "in.wav", render(two_channel_script()).recording);
  PipelineConfig cfg;
  cfg.backend = Backend::kExternal;
  cfg.adapter = "exec:exit 3";
  cfg.adapter_timeout_s = 2.0;
  const auto r = annotate(dir / "in.wav", cfg, dir / "out");
  EXPECT_FALSE(r.failed);
  EXPECT_GT(r.manifest["channels"]["RUQ"]["fallbacks"].get<std::size_t>(), 0u);
  const auto ref = annotate(dir / "in.wav", PipelineConfig{}, dir / "ref");
  EXPECT_EQ(read_text_file(dir / "out" / labels_file_name("in", Quadrant::kRUQ)),
            read_text_file(dir / "ref" / labels_file_name("in", Quadrant::kRUQ)));
}

TEST(Annotate, MissingInputIsIoError) {
  try {
    annotate("/nonexistent/x.wav", PipelineConfig{}, scratch("missing"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kIo);
  }
}

TEST(Evaluate, IdenticalFilesGiveZeroDiff) {
  const auto dir = scratch("eval");
  write_text_file(dir / "a.txt", "0.000000\t1.000000\tSB\n1.500000\t2.000000\tMB\n");
  EvalOptions opts;
  opts.adjustment = true;
  const auto j = evaluate(dir / "a.txt", dir / "a.txt", dir / "out", opts);
  EXPECT_EQ(j["agreement"]["missed"], 0);
  EXPECT_EQ(j["agreement"]["spurious"], 0);
  EXPECT_EQ(j["agreement"]["boundary_mae_ms"], 0.0);
  EXPECT_EQ(j["adjustment"]["pct_removed_or_merged"], 0.0);
  for (const char* f : {"agreement.json", "distribution.json", "distribution.csv", "confusion.csv", "durations.csv",
                        "adjustment.json", "adjustment.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / f)) << f;
  }
}

TEST(Evaluate, MismatchedSpansFail) {
  const auto dir = scratch("eval_span");
  write_text_file(dir / "a.txt", "0.000000\t1.000000\tSB\n1.000000\t5.000000\tNone\n");
  write_text_file(dir / "b.txt", "0.000000\t1.000000\tSB\n1.000000\t7.000000\tNone\n");
  try {
    evaluate(dir / "a.txt", dir / "b.txt", dir / "out");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kSpanMismatch);
  }
}

TEST(Evaluate, ParseErrorsNameFileAndLine) {
  const auto dir = scratch("eval_parse");
  write_text_file(dir / "a.txt", "0.000000\t1.000000\tSB\n1.0\tx\tMB\n");
  try {
    evaluate(dir / "a.txt", dir / "a.txt", dir / "out");
    FAIL();
  } catch (const Error& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("a.txt"), std::string::npos);
    EXPECT_NE(what.find("line 2"), std::string::npos);
  }
}

TEST(Synthesize, WritesWavAndTruth) {
  const auto dir = scratch("synth");
  write_text_file(dir / "demo.json", script_to_json(two_channel_script()).dump());
  const auto files = synthesize(dir / "demo.json", dir / "out");
  ASSERT_EQ(files.size(), 3u);
  const auto rec = load_wav(dir / "out" / "demo.wav");
  EXPECT_EQ(rec.channels().size(), 2u);
  EXPECT_EQ(load_label_file(dir / "out" / "demo.RUQ.labels.txt").size(), 3u);
  const auto again = synthesize(dir / "demo.json", dir / "again");
  EXPECT_EQ(read_text_file(dir / "out" / "demo.wav"), read_text_file(dir / "again" / "demo.wav"));
}

}  // namespace
}  // namespace bsannot
