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
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "bsannot/audio.hpp"
#include "bsannot/error.hpp"
#include "bsannot/mel.hpp"
#include "bsannot/pipeline.hpp"
#include "bsannot/review.hpp"
#include "bsannot/wav.hpp"

namespace bsannot {

inline int http_status(Errc code) {
  switch (code) {
    case Errc::kNotFound: return 404;
    case Errc::kStaleRevision:
    case Errc::kAlreadyFinished: return 409;
    case Errc::kIo: return 500;
    default: return 422;
  }
}

inline nlohmann::json error_json(Errc code, const std::string& message) {
  return {{"v", 1}, {"error", {{"code", errc_name(code)}, {"message", message}}}};
}

struct ServiceOptions {
  std::filesystem::path data_dir;
  std::filesystem::path session_dir;  // default: <data_dir>/sessions
  std::filesystem::path static_dir;   // optional UI bundle served at /
  MelConfig mel;
  double max_tile_s = 60.0;  // longest spectrogram tile
  Clock clock = system_seconds;
};

/// HTTP JSON API over a data directory of <stem>.wav recordings and their
/// <stem>.<QUAD>.labels.txt automatic tracks.
///
///   GET  /health
///   GET  /recordings
///   POST /sessions                   {v, recording, quadrant}
///   GET  /sessions/{id}
///   GET  /sessions/{id}/audio        ?from&to  (mono PCM16 WAV)
///   GET  /sessions/{id}/spectrogram  ?from&to  (log-mel tile)
///   POST /sessions/{id}/edits        {v, revision, edit}
///   POST /sessions/{id}/finish       {v, manual_baseline_s?}
///
/// Errors are {"v": 1, "error": {"code", "message"}}.
class ReviewService {
 public:
  explicit ReviewService(ServiceOptions opts)
      : opts_(std::move(opts)),
        store_(opts_.session_dir.empty() ? opts_.data_dir / "sessions" : opts_.session_dir, opts_.clock) {
    if (!std::filesystem::is_directory(opts_.data_dir)) {
      throw Error(Errc::kIo, opts_.data_dir.string() + " is not a directory");
    }
  }

  SessionStore& store() { return store_; }

  void mount(httplib::Server& srv) {
    // The library default also sets SO_REUSEPORT, which lets a second server
    // bind a port that is already in use.
    srv.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Headers", "Content-Type"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    srv.Get("/health", wrap([](const httplib::Request&, httplib::Response& res) {
              send(res, 200, {{"v", 1}, {"status", "ok"}, {"version", kVersion}});
            }));
    srv.Get("/recordings", wrap([this](const httplib::Request&, httplib::Response& res) {
              send(res, 200, recordings());
            }));
    srv.Post("/sessions", wrap([this](const httplib::Request& req, httplib::Response& res) {
               const auto body = parse_body(req);
               const auto name = review_detail::text(body, "recording");
               const auto q = parse_quadrant(review_detail::text(body, "quadrant"));
               send(res, 201, session_view(create_session(name, q)));
             }));
    srv.Get(R"(/sessions/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
              send(res, 200, session_view(store_.get(req.matches[1])));
            }));
    srv.Get(R"(/sessions/([^/]+)/audio)", wrap([this](const httplib::Request& req, httplib::Response& res) {
              const auto s = store_.get(req.matches[1]);
              const AudioClip clip = window(s, req);
              const auto bytes = encode_wav(Recording({{s.quadrant(), clip}}), SampleFormat::kPcm16);
              res.status = 200;
              res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
            }));
    srv.Get(R"(/sessions/([^/]+)/spectrogram)",
            wrap([this](const httplib::Request& req, httplib::Response& res) {
              const auto s = store_.get(req.matches[1]);
              send(res, 200, spectrogram(s, req));
            }));
    srv.Post(R"(/sessions/([^/]+)/edits)", wrap([this](const httplib::Request& req, httplib::Response& res) {
               const auto body = parse_body(req);
               const auto& rev = review_detail::field(body, "revision");
               if (!rev.is_number_unsigned()) {
                 throw Error(Errc::kInvalidArgument, "'revision' must be a non-negative integer");
               }
               const Edit edit = edit_from_json(review_detail::field(body, "edit"));
               send(res, 200, session_view(store_.apply(req.matches[1], rev.get<std::uint64_t>(), edit)));
             }));
    srv.Post(R"(/sessions/([^/]+)/finish)", wrap([this](const httplib::Request& req, httplib::Response& res) {
               std::optional<double> baseline;
               if (!req.body.empty()) baseline = review_detail::opt_number(parse_body(req), "manual_baseline_s");
               const auto report = store_.finish(req.matches[1], baseline);
               send(res, 200, {{"v", 1}, {"session", req.matches[1].str()}, {"report", to_json(report)}});
             }));
    if (!opts_.static_dir.empty()) srv.set_mount_point("/", opts_.static_dir.string());
  }

  nlohmann::json recordings() {
    std::vector<std::filesystem::path> wavs;
    for (const auto& e : std::filesystem::directory_iterator(opts_.data_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".wav") wavs.push_back(e.path());
    }
    std::sort(wavs.begin(), wavs.end());
    nlohmann::json list = nlohmann::json::array();
    for (const auto& p : wavs) {
      const std::string name = p.stem().string();
      nlohmann::json item = {{"name", name}};
      try {
        const auto rec = recording(name);
        nlohmann::json chans = nlohmann::json::array();
        nlohmann::json labelled = nlohmann::json::array();
        for (const auto& [q, clip] : rec->channels()) {
          chans.push_back(quadrant_name(q));
          if (std::filesystem::exists(opts_.data_dir / labels_file_name(name, q))) {
            labelled.push_back(quadrant_name(q));
          }
        }
        item["sample_rate"] = rec->sample_rate();
        item["duration_s"] = rec->channels().begin()->second.duration_s();
        item["channels"] = std::move(chans);
        item["labelled"] = std::move(labelled);
      } catch (const Error& e) {
        item["error"] = error_json(e.code(), e.what())["error"];
      }
      list.push_back(std::move(item));
    }
    return {{"v", 1}, {"recordings", std::move(list)}};
  }

  ReviewSession create_session(const std::string& name, Quadrant q) {
    const auto rec = recording(name);
    const AudioClip& clip = rec->channel(q);
    const auto labels = opts_.data_dir / labels_file_name(name, q);
    if (!std::filesystem::exists(labels)) {
      throw Error(Errc::kNotFound, "no automatic labels for " + name + " " + std::string(quadrant_name(q)));
    }
    const LabelTrack track = load_label_file(labels, TrackSource::kAuto);
    return store_.create(name, q, track, clip.duration_s());
  }

 private:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static void send(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static Handler wrap(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        send(res, http_status(e.code()), error_json(e.code(), e.what()));
      } catch (const nlohmann::json::exception& e) {
        send(res, 400, error_json(Errc::kInvalidArgument, e.what()));
      } catch (const std::exception& e) {
        send(res, 500, error_json(Errc::kIo, e.what()));
      }
    };
  }

  static nlohmann::json parse_body(const httplib::Request& req) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::kInvalidArgument, std::string("request body is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("v") || j.at("v") != kReviewSchemaVersion) {
      throw Error(Errc::kInvalidArgument, "payload must carry \"v\": 1");
    }
    return j;
  }

  static nlohmann::json session_view(const ReviewSession& s) {
    nlohmann::json auto_track = nlohmann::json::array();
    for (const Segment& seg : s.auto_track().segments()) auto_track.push_back(review_detail::segment_json(seg));
    nlohmann::json j = {{"v", 1},
                        {"id", s.id()},
                        {"recording", s.recording()},
                        {"quadrant", quadrant_name(s.quadrant())},
                        {"duration_s", s.duration_s()},
                        {"revision", s.revision()},
                        {"finished", s.finished()},
                        {"started_at", s.started_at()},
                        {"edits", s.log().size()},
                        {"track", to_json(s.working())},
                        {"auto_track", std::move(auto_track)}};
    if (s.finished_at()) j["finished_at"] = *s.finished_at();
    if (s.report()) j["report"] = to_json(*s.report());
    return j;
  }

  std::shared_ptr<const Recording> recording(const std::string& name) {
    if (name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos ||
        name.starts_with('.')) {
      throw Error(Errc::kInvalidArgument, "bad recording name '" + name + "'");
    }
    std::lock_guard lock(cache_mu_);
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    const auto path = opts_.data_dir / (name + ".wav");
    if (!std::filesystem::exists(path)) throw Error(Errc::kNotFound, "no recording '" + name + "'");
    auto rec = std::make_shared<const Recording>(load_wav(path));
    cache_.emplace(name, rec);
    return rec;
  }

  static std::optional<double> query_seconds(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) return std::nullopt;
    const std::string v = req.get_param_value(key);
    try {
      std::size_t used = 0;
      const double t = std::stod(v, &used);
      if (used == v.size() && std::isfinite(t)) return t;
    } catch (const std::exception&) {
    }
    throw Error(Errc::kInvalidArgument, std::string("query '") + key + "' must be a number of seconds");
  }

  // [from, to) of the session's channel; `to` is clamped to the recording.
  AudioClip window(const ReviewSession& s, const httplib::Request& req, double max_len = 0.0) {
    const auto rec = recording(s.recording());
    const AudioClip& clip = rec->channel(s.quadrant());
    const double from = query_seconds(req, "from").value_or(0.0);
    const double to = std::min(query_seconds(req, "to").value_or(clip.duration_s()), clip.duration_s());
    if (!(from >= 0.0) || !(from < to)) {
      throw Error(Errc::kOutOfRange, "window [from, to) must satisfy 0 <= from < to <= duration");
    }
    if (max_len > 0.0 && to - from > max_len + 1e-9) {
      throw Error(Errc::kOutOfRange, "tile longer than " + std::to_string(max_len) + " s");
    }
    return slice(clip, from, to);
  }

  nlohmann::json spectrogram(const ReviewSession& s, const httplib::Request& req) {
    const AudioClip clip = window(s, req, opts_.max_tile_s);
    const double from = query_seconds(req, "from").value_or(0.0);
    const LogMel m = log_mel(clip, opts_.mel);
    const int fs = clip.sample_rate();
    const double win_s = std::lround(opts_.mel.win_ms * fs / 1000.0) / static_cast<double>(fs);
    const double hop_s = std::lround(opts_.mel.hop_ms * fs / 1000.0) / static_cast<double>(fs);
    nlohmann::json times = nlohmann::json::array();
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t f = 0; f < m.n_frames; ++f) {
      times.push_back(from + static_cast<double>(f) * hop_s + win_s / 2.0);
      std::vector<double> row(m.n_bands);
      for (std::size_t b = 0; b < m.n_bands; ++b) row[b] = std::round(m.at(f, b) * 100.0) / 100.0;
      rows.push_back(std::move(row));
    }
    return {{"v", 1},
            {"from_s", from},
            {"to_s", from + clip.duration_s()},
            {"win_s", win_s},
            {"hop_s", hop_s},
            {"n_frames", m.n_frames},
            {"n_bands", m.n_bands},
            {"bands_hz", m.band_hz},
            {"times_s", std::move(times)},
            {"db", std::move(rows)}};
  }

  ServiceOptions opts_;
  SessionStore store_;
  std::mutex cache_mu_;
  std::map<std::string, std::shared_ptr<const Recording>> cache_;
};

}  // namespace bsannot
