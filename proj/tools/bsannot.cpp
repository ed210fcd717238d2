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

// bsannot: detect, classify and refine bowel-sound events; evaluate label
// tracks; render synthetic recordings; serve the expert review API.
//
// Exit codes: 0 success, 1 processing error, 2 usage or I/O error. Errors are
// printed to stderr as {"v": 1, "error": {"code", "message"}}.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "bsannot/pipeline.hpp"
#include "bsannot/service.hpp"
#include "bsannot/spectral.hpp"

namespace fs = std::filesystem;
using bsannot::Errc;
using bsannot::Error;

namespace {

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::kIo:
    case Errc::kZeroLength:
    case Errc::kCorruptHeader:
    case Errc::kUnsupportedEncoding:
    case Errc::kInvalidArgument: return 2;
    default: return 1;
  }
}

int fail(Errc code, const std::string& message, nlohmann::json extra = nullptr) {
  auto j = bsannot::error_json(code, message);
  if (!extra.is_null()) j["error"]["details"] = std::move(extra);
  std::cerr << j.dump() << '\n';
  return exit_code_for(code);
}

struct AnnotateArgs {
  std::string in, out, config;
  std::optional<std::string> cohort, backend, adapter;
  std::vector<std::string> models;
  int jobs = 1;
  bool keep_going = false;
};

int run_annotate(const AnnotateArgs& a) {
  bsannot::PipelineConfig cfg;
  fs::path config_dir;
  if (!a.config.empty()) {
    cfg = bsannot::config_from_json(bsannot::read_json_file(a.config));
    config_dir = fs::path(a.config).parent_path();
  }
  if (a.cohort) cfg.cohort = bsannot::parse_cohort(*a.cohort);
  if (a.backend) cfg.backend = bsannot::parse_backend(*a.backend);
  if (a.adapter) cfg.adapter = *a.adapter;
  for (const std::string& m : a.models) {
    const auto eq = m.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(Errc::kInvalidArgument, "--model expects key=path");
    cfg.models[m.substr(0, eq)] = fs::absolute(m.substr(eq + 1)).string();
  }
  if (!fs::exists(a.in)) throw Error(Errc::kIo, "no such file: " + a.in);

  bsannot::AnnotateOptions opts;
  opts.jobs = a.jobs;
  opts.keep_going = a.keep_going;
  opts.config_dir = config_dir;
  const auto result = bsannot::annotate(a.in, cfg, a.out, opts);
  if (result.failed && !a.keep_going) {
    // Processing failure: label files of healthy channels are still on disk.
    Errc code = Errc::kInvalidArgument;
    for (const auto& c : result.channels) {
      if (c.error) code = *c.error;
      else if (!c.failures.empty()) code = c.failures.front().code;
      if (!c.ok()) break;
    }
    fail(code, "one or more channels failed", result.manifest["channels"]);
    return 1;
  }
  std::cout << result.manifest.dump(2) << '\n';
  return 0;
}

int run_train(const std::string& corpus_dir, const std::string& cohort, const std::string& out,
              const bsannot::TrainOptions& opts) {
  std::vector<bsannot::TrainingItem> corpus;
  std::vector<fs::path> wavs;
  for (const auto& e : fs::directory_iterator(corpus_dir)) {
    if (e.path().extension() == ".wav") wavs.push_back(e.path());
  }
  std::sort(wavs.begin(), wavs.end());
  for (const auto& w : wavs) {
    const auto rec = bsannot::load_wav(w);
    const std::string stem = w.stem().string();
    for (const auto& [q, clip] : rec.channels()) {
      const auto labels = w.parent_path() / bsannot::labels_file_name(stem, q);
      if (!fs::exists(labels)) continue;
      corpus.push_back({stem, clip, bsannot::load_label_file(labels)});
    }
  }
  if (corpus.empty()) throw Error(Errc::kIo, "no labelled recordings in " + corpus_dir);
  const auto r = bsannot::train_spectral(corpus, cohort, bsannot::MelConfig{}, opts);
  bsannot::save_model(out, r.model);
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  std::cout << nlohmann::json{{"v", 1},
                              {"model_id", r.id},
                              {"cohort", cohort},
                              {"split", {{"train", r.split.train}, {"validation", r.split.validation},
                                         {"test", r.split.test}}},
                              {"segments", {{"train", r.train_segments}, {"validation", r.validation_segments},
                                            {"test", r.test_segments}}},
                              {"validation_accuracy", opt(r.validation_accuracy)},
                              {"test_accuracy", opt(r.test_accuracy)}}
                   .dump(2)
            << '\n';
  return 0;
}

int run_serve(const std::string& host, int port, const bsannot::ServiceOptions& opts) {
  // Block the shutdown signals before any thread starts; one thread waits
  // for them and stops the server so sessions can be flushed on the way out.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGINT);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  bsannot::ReviewService service(opts);
  httplib::Server srv;
  service.mount(srv);
  if (!srv.bind_to_port(host, port)) {
    return fail(Errc::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  std::thread([&srv, set] {
    int sig = 0;
    sigwait(&set, &sig);
    srv.stop();
  }).detach();
  std::cout << nlohmann::json{{"v", 1}, {"status", "listening"}, {"host", host}, {"port", port},
                              {"version", bsannot::kVersion}}
                   .dump()
            << std::endl;
  srv.listen_after_bind();
  service.store().flush();
  std::cout << nlohmann::json{{"v", 1}, {"status", "stopped"}, {"sessions", service.store().ids().size()}}.dump()
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bowel-sound event annotation toolkit"};
  app.set_version_flag("--version", std::string(bsannot::kVersion));
  app.require_subcommand(1);

  AnnotateArgs ann;
  auto* annotate = app.add_subcommand("annotate", "Detect, classify and refine events per channel");
  annotate->add_option("--in", ann.in, "Input WAV (1-4 channels)")->required();
  annotate->add_option("--out", ann.out, "Output directory")->required();
  annotate->add_option("--config", ann.config, "Pipeline config JSON");
  annotate->add_option("--cohort", ann.cohort, "healthy | patient | unknown");
  annotate->add_option("--backend", ann.backend, "rule | spectral | external");
  annotate->add_option("--adapter", ann.adapter, "External adapter: exec:<cmd> or tcp:<host>:<port>");
  annotate->add_option("--model", ann.models, "Spectral model as key=path (repeatable)");
  annotate->add_option("--jobs", ann.jobs, "Channels processed in parallel")->check(CLI::PositiveNumber);
  annotate->add_flag("--keep-going", ann.keep_going, "Write what succeeded and exit 0 on channel failures");

  std::string ref, cand, eval_out;
  bsannot::EvalOptions eval_opts;
  std::optional<double> span;
  auto* eval = app.add_subcommand("eval", "Compare a candidate label file with a reference");
  eval->add_option("--ref", ref, "Reference labels")->required();
  eval->add_option("--cand", cand, "Candidate labels")->required();
  eval->add_option("--out", eval_out, "Report directory")->required();
  std::string eval_audio;
  eval->add_option("--span", span, "Recording span in seconds");
  eval->add_option("--audio", eval_audio, "Recording whose duration sets the span");
  eval->add_option("--min-iou", eval_opts.agreement.min_iou, "Match threshold");
  eval->add_option("--bin-ms", eval_opts.histogram_bin_ms, "Duration histogram bin width");
  eval->add_flag("--adjustment", eval_opts.adjustment, "Also report ref as auto vs cand as expert");

  std::string script, synth_out, stem;
  auto* synth = app.add_subcommand("synth", "Render a synthesis script to WAV plus ground truth");
  synth->add_option("--script", script, "Script JSON")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--stem", stem, "Output file stem (default: script name)");

  std::string host = "127.0.0.1", data_dir, session_dir, ui_dir;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the review service");
  serve->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--data", data_dir, "Directory with recordings and automatic labels")->required();
  serve->add_option("--sessions", session_dir, "Session directory (default: <data>/sessions)");
  serve->add_option("--ui", ui_dir, "Static UI bundle to serve at /");

  std::string corpus_dir, train_out, train_cohort = "combined";
  bsannot::TrainOptions train_opts;
  auto* train = app.add_subcommand("train", "Fit the spectral classifier on labelled recordings");
  train->add_option("--corpus", corpus_dir, "Directory of <stem>.wav and <stem>.<QUAD>.labels.txt")->required();
  train->add_option("--out", train_out, "Model file to write")->required();
  train->add_option("--cohort", train_cohort, "Cohort tag stored in the model");
  train->add_option("--seed", train_opts.seed, "Split seed");
  train->add_option("--epochs", train_opts.epochs, "Gradient steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (annotate->parsed()) return run_annotate(ann);
    if (eval->parsed()) {
      if (!eval_audio.empty()) span = bsannot::load_wav(eval_audio).channels().begin()->second.duration_s();
      eval_opts.span_s = span;
      std::cout << bsannot::evaluate(ref, cand, eval_out, eval_opts).dump(2) << '\n';
      return 0;
    }
    if (synth->parsed()) {
      nlohmann::json files = nlohmann::json::array();
      for (const auto& p : bsannot::synthesize(script, synth_out, stem)) files.push_back(p.string());
      std::cout << nlohmann::json{{"v", 1}, {"written", files}}.dump(2) << '\n';
      return 0;
    }
    if (serve->parsed()) {
      bsannot::ServiceOptions opts;
      opts.data_dir = data_dir;
      opts.session_dir = session_dir;
      opts.static_dir = ui_dir;
      return run_serve(host, port, opts);
    }
    if (train->parsed()) return run_train(corpus_dir, train_cohort, train_out, train_opts);
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(Errc::kIo, e.what());
  }
  return 2;
}
