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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bsannot/audio.hpp"
#include "bsannot/error.hpp"
#include "bsannot/evalstats.hpp"
#include "bsannot/patterns.hpp"

namespace bsannot {

inline constexpr int kReviewSchemaVersion = 1;

/// Wall-clock seconds since the epoch. Injected so tests control time.
using Clock = std::function<double()>;

inline double system_seconds() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

enum class EditOp { kRelabel, kMoveBoundary, kSplit, kMerge, kDelete, kInsert };

inline std::string_view edit_op_name(EditOp op) {
  switch (op) {
    case EditOp::kRelabel: return "relabel";
    case EditOp::kMoveBoundary: return "move-boundary";
    case EditOp::kSplit: return "split";
    case EditOp::kMerge: return "merge";
    case EditOp::kDelete: return "delete";
    case EditOp::kInsert: return "insert";
  }
  return "?";
}

inline EditOp parse_edit_op(std::string_view name) {
  for (EditOp op : {EditOp::kRelabel, EditOp::kMoveBoundary, EditOp::kSplit, EditOp::kMerge,
                    EditOp::kDelete, EditOp::kInsert}) {
    if (edit_op_name(op) == name) return op;
  }
  throw Error(Errc::kInvalidArgument, "unknown edit op '" + std::string(name) + "'");
}

/// One expert edit. Which fields are read depends on op:
///   relabel        id, label
///   move-boundary  id, start_s and/or end_s
///   split          id, at_s (the right half gets a fresh id)
///   merge          ids (>= 2), optional label (default: earliest segment's)
///   delete         id
///   insert         start_s, end_s, label
struct Edit {
  EditOp op = EditOp::kRelabel;
  std::string id{};
  std::vector<std::string> ids{};
  std::optional<PatternLabel> label{};
  std::optional<double> start_s{};
  std::optional<double> end_s{};
  std::optional<double> at_s{};

  bool operator==(const Edit&) const = default;
};

namespace review_detail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(Errc::kInvalidArgument, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

inline double number(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number()) throw Error(Errc::kInvalidArgument, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

inline std::string text(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw Error(Errc::kInvalidArgument, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

inline std::optional<double> opt_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return number(j, key);
}

}  // namespace review_detail

inline nlohmann::json to_json(const Edit& e) {
  nlohmann::json j = {{"op", edit_op_name(e.op)}};
  if (!e.id.empty()) j["id"] = e.id;
  if (!e.ids.empty()) j["ids"] = e.ids;
  if (e.label) j["label"] = label_name(*e.label);
  if (e.start_s) j["start_s"] = *e.start_s;
  if (e.end_s) j["end_s"] = *e.end_s;
  if (e.at_s) j["at_s"] = *e.at_s;
  return j;
}

inline Edit edit_from_json(const nlohmann::json& j) {
  using namespace review_detail;
  Edit e;
  e.op = parse_edit_op(text(j, "op"));
  auto label = [&] { return parse_label(text(j, "label")); };
  switch (e.op) {
    case EditOp::kRelabel:
      e.id = text(j, "id");
      e.label = label();
      break;
    case EditOp::kMoveBoundary:
      e.id = text(j, "id");
      e.start_s = opt_number(j, "start_s");
      e.end_s = opt_number(j, "end_s");
      if (!e.start_s && !e.end_s) {
        throw Error(Errc::kInvalidArgument, "move-boundary needs start_s or end_s");
      }
      break;
    case EditOp::kSplit:
      e.id = text(j, "id");
      e.at_s = number(j, "at_s");
      break;
    case EditOp::kMerge: {
      const auto& ids = field(j, "ids");
      if (!ids.is_array()) throw Error(Errc::kInvalidArgument, "'ids' must be an array");
      for (const auto& v : ids) {
        if (!v.is_string()) throw Error(Errc::kInvalidArgument, "'ids' must hold strings");
        e.ids.push_back(v.get<std::string>());
      }
      if (j.contains("label") && !j.at("label").is_null()) e.label = label();
      break;
    }
    case EditOp::kDelete:
      e.id = text(j, "id");
      break;
    case EditOp::kInsert:
      e.start_s = number(j, "start_s");
      e.end_s = number(j, "end_s");
      e.label = label();
      break;
  }
  return e;
}

struct TrackedSegment {
  std::string id;
  Segment segment;

  bool operator==(const TrackedSegment&) const = default;
};

/// Segments with stable ids, kept sorted and non-overlapping inside
/// [0, span]. apply() is all-or-nothing: it builds the new state on a copy.
class WorkingTrack {
 public:
  WorkingTrack() = default;

  WorkingTrack(const LabelTrack& track, std::int64_t span_us) : span_us_(span_us) {
    for (const Segment& s : track.segments()) {
      items_.push_back({fresh_id(), Segment(s.start_us(), s.end_us(), s.label())});
    }
    check();
  }

  const std::vector<TrackedSegment>& items() const { return items_; }
  std::int64_t span_us() const { return span_us_; }
  std::uint64_t next_id() const { return next_id_; }

  LabelTrack track(TrackSource source = TrackSource::kExpertAdjusted) const {
    std::vector<Segment> segs;
    segs.reserve(items_.size());
    for (const auto& t : items_) segs.push_back(t.segment);
    return LabelTrack(std::move(segs), source);
  }

  WorkingTrack apply(const Edit& e) const {
    WorkingTrack next = *this;
    next.mutate(e);
    next.check();
    return next;
  }

  bool operator==(const WorkingTrack&) const = default;

  static WorkingTrack restore(std::vector<TrackedSegment> items, std::uint64_t next_id,
                              std::int64_t span_us) {
    WorkingTrack w;
    w.items_ = std::move(items);
    w.next_id_ = next_id;
    w.span_us_ = span_us;
    w.check();
    return w;
  }

 private:
  std::string fresh_id() { return "s" + std::to_string(next_id_++); }

  std::size_t find(const std::string& id) const {
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (items_[i].id == id) return i;
    }
    throw Error(Errc::kUnknownSegment, "no segment with id '" + id + "'");
  }

  void mutate(const Edit& e) {
    switch (e.op) {
      case EditOp::kRelabel: {
        auto& t = items_[find(e.id)];
        t.segment = t.segment.with_label(*e.label);
        break;
      }
      case EditOp::kMoveBoundary: {
        auto& t = items_[find(e.id)];
        const std::int64_t s = e.start_s ? seconds_to_us(*e.start_s) : t.segment.start_us();
        const std::int64_t en = e.end_s ? seconds_to_us(*e.end_s) : t.segment.end_us();
        t.segment = Segment(s, en, t.segment.label());
        break;
      }
      case EditOp::kSplit: {
        const std::size_t i = find(e.id);
        const Segment old = items_[i].segment;
        const std::int64_t at = seconds_to_us(*e.at_s);
        if (at <= old.start_us() || at >= old.end_us()) {
          throw Error(Errc::kOutOfRange, "split point outside segment '" + e.id + "'");
        }
        items_[i].segment = Segment(old.start_us(), at, old.label());
        items_.insert(items_.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                      {fresh_id(), Segment(at, old.end_us(), old.label())});
        break;
      }
      case EditOp::kMerge: {
        if (e.ids.size() < 2) throw Error(Errc::kInvalidArgument, "merge needs at least two ids");
        std::vector<std::size_t> idx;
        for (const auto& id : e.ids) idx.push_back(find(id));
        std::sort(idx.begin(), idx.end());
        if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) {
          throw Error(Errc::kInvalidArgument, "merge lists a segment twice");
        }
        // Sorted storage: the chosen segments must be consecutive, otherwise
        // the merged span would swallow a segment that was not selected.
        if (idx.back() - idx.front() + 1 != idx.size()) {
          throw Error(Errc::kOverlap, "merged span would cover an unselected segment");
        }
        const auto& first = items_[idx.front()];
        const Segment merged(first.segment.start_us(), items_[idx.back()].segment.end_us(),
                             e.label.value_or(first.segment.label()));
        const std::string keep = first.id;
        items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(idx.front()),
                     items_.begin() + static_cast<std::ptrdiff_t>(idx.back()) + 1);
        items_.insert(items_.begin() + static_cast<std::ptrdiff_t>(idx.front()), {keep, merged});
        break;
      }
      case EditOp::kDelete:
        items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(find(e.id)));
        break;
      case EditOp::kInsert: {
        const Segment s(seconds_to_us(*e.start_s), seconds_to_us(*e.end_s), *e.label);
        const auto at = std::lower_bound(items_.begin(), items_.end(), s.start_us(),
                                         [](const TrackedSegment& t, std::int64_t v) {
                                           return t.segment.start_us() < v;
                                         });
        items_.insert(at, {fresh_id(), s});
        break;
      }
    }
  }

  void check() const {
    for (std::size_t i = 0; i < items_.size(); ++i) {
      const Segment& s = items_[i].segment;
      if (s.start_us() < 0 || s.end_us() > span_us_) {
        throw Error(Errc::kOutOfRange, "segment '" + items_[i].id + "' leaves the recording");
      }
      if (i > 0 && s.start_us() < items_[i - 1].segment.end_us()) {
        throw Error(Errc::kOverlap, "segments '" + items_[i - 1].id + "' and '" + items_[i].id + "' overlap");
      }
    }
  }

  std::vector<TrackedSegment> items_;
  std::uint64_t next_id_ = 0;
  std::int64_t span_us_ = 0;
};

struct EditLogEntry {
  std::uint64_t revision = 0;  // revision after this edit
  double timestamp = 0.0;
  Edit edit;

  bool operator==(const EditLogEntry&) const = default;
};

/// Event-sourced review of one channel's automatic labels. The auto track is
/// frozen; the working track is always the fold of the log over it.
class ReviewSession {
 public:
  ReviewSession() = default;

  ReviewSession(std::string id, std::string recording, Quadrant quadrant, LabelTrack auto_track,
                double duration_s, double now)
      : id_(std::move(id)),
        recording_(std::move(recording)),
        quadrant_(quadrant),
        duration_s_(duration_s),
        auto_(LabelTrack(auto_track.segments(), TrackSource::kAuto)),
        working_(auto_, seconds_to_us(duration_s)),
        started_at_(now) {}

  const std::string& id() const { return id_; }
  const std::string& recording() const { return recording_; }
  Quadrant quadrant() const { return quadrant_; }
  double duration_s() const { return duration_s_; }
  const LabelTrack& auto_track() const { return auto_; }
  const WorkingTrack& working() const { return working_; }
  const std::vector<EditLogEntry>& log() const { return log_; }
  std::uint64_t revision() const { return revision_; }
  double started_at() const { return started_at_; }
  const std::optional<double>& finished_at() const { return finished_at_; }
  bool finished() const { return finished_at_.has_value(); }
  const std::optional<AdjustmentReport>& report() const { return report_; }

  /// Applies one edit if `revision` is current. Returns the new revision.
  std::uint64_t apply(std::uint64_t revision, const Edit& edit, double now) {
    if (finished()) throw Error(Errc::kAlreadyFinished, "session " + id_ + " is finished");
    if (revision != revision_) {
      throw Error(Errc::kStaleRevision, "revision " + std::to_string(revision) +
                                            " is stale; current is " + std::to_string(revision_));
    }
    WorkingTrack next = working_.apply(edit);
    log_.push_back({revision_ + 1, now, edit});
    working_ = std::move(next);
    return ++revision_;
  }

  /// Working track rebuilt from the auto track and the log.
  WorkingTrack replay() const {
    WorkingTrack w(auto_, seconds_to_us(duration_s_));
    for (const auto& entry : log_) w = w.apply(entry.edit);
    return w;
  }

  const AdjustmentReport& finish(double now, std::optional<double> manual_baseline_s = {}) {
    if (finished()) throw Error(Errc::kAlreadyFinished, "session " + id_ + " is already finished");
    AdjustmentOptions opts;
    opts.span_s = duration_s_;
    opts.review_time_s = std::max(0.0, now - started_at_);
    opts.manual_baseline_s = manual_baseline_s;
    report_ = adjustment_report(auto_, working_.track(), opts);
    finished_at_ = now;
    return *report_;
  }

  friend nlohmann::json to_json(const ReviewSession& s);
  friend ReviewSession session_from_json(const nlohmann::json& j);

 private:
  std::string id_;
  std::string recording_;
  Quadrant quadrant_ = Quadrant::kRUQ;
  double duration_s_ = 0.0;
  LabelTrack auto_;
  WorkingTrack working_;
  std::vector<EditLogEntry> log_;
  std::uint64_t revision_ = 0;
  double started_at_ = 0.0;
  std::optional<double> finished_at_;
  std::optional<AdjustmentReport> report_;
};

namespace review_detail {

inline nlohmann::json segment_json(const Segment& s) {
  return {{"start_s", s.start_s()}, {"end_s", s.end_s()}, {"label", label_name(s.label())}};
}

inline Segment segment_from_json(const nlohmann::json& j) {
  return Segment(seconds_to_us(number(j, "start_s")), seconds_to_us(number(j, "end_s")),
                 parse_label(text(j, "label")));
}

}  // namespace review_detail

inline nlohmann::json to_json(const WorkingTrack& w) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : w.items()) {
    auto j = review_detail::segment_json(t.segment);
    j["id"] = t.id;
    arr.push_back(std::move(j));
  }
  return arr;
}

/// Full persisted form: auto track, edit log and working snapshot.
inline nlohmann::json to_json(const ReviewSession& s) {
  nlohmann::json auto_arr = nlohmann::json::array();
  for (const Segment& seg : s.auto_.segments()) auto_arr.push_back(review_detail::segment_json(seg));
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : s.log_) {
    log.push_back({{"revision", e.revision}, {"timestamp", e.timestamp}, {"edit", to_json(e.edit)}});
  }
  nlohmann::json j = {{"v", kReviewSchemaVersion},
                      {"id", s.id_},
                      {"recording", s.recording_},
                      {"quadrant", quadrant_name(s.quadrant_)},
                      {"duration_s", s.duration_s_},
                      {"revision", s.revision_},
                      {"started_at", s.started_at_},
                      {"finished_at", s.finished_at_ ? nlohmann::json(*s.finished_at_) : nlohmann::json()},
                      {"auto_track", std::move(auto_arr)},
                      {"working_track", to_json(s.working_)},
                      {"next_id", s.working_.next_id()},
                      {"edit_log", std::move(log)}};
  if (s.report_) j["report"] = to_json(*s.report_);
  return j;
}

/// Loads a persisted session and checks that its log replays to the snapshot.
inline ReviewSession session_from_json(const nlohmann::json& j) {
  using namespace review_detail;
  try {
    if (number(j, "v") != kReviewSchemaVersion) {
      throw Error(Errc::kInvalidArgument, "unsupported session version");
    }
    ReviewSession s;
    s.id_ = text(j, "id");
    s.recording_ = text(j, "recording");
    s.quadrant_ = parse_quadrant(text(j, "quadrant"));
    s.duration_s_ = number(j, "duration_s");
    s.revision_ = field(j, "revision").get<std::uint64_t>();
    s.started_at_ = number(j, "started_at");
    s.finished_at_ = opt_number(j, "finished_at");
    std::vector<Segment> auto_segs;
    for (const auto& v : field(j, "auto_track")) auto_segs.push_back(segment_from_json(v));
    s.auto_ = LabelTrack(std::move(auto_segs), TrackSource::kAuto);
    std::vector<TrackedSegment> items;
    for (const auto& v : field(j, "working_track")) items.push_back({text(v, "id"), segment_from_json(v)});
    s.working_ = WorkingTrack::restore(std::move(items), field(j, "next_id").get<std::uint64_t>(),
                                       seconds_to_us(s.duration_s_));
    for (const auto& v : field(j, "edit_log")) {
      s.log_.push_back({field(v, "revision").get<std::uint64_t>(), number(v, "timestamp"),
                        edit_from_json(field(v, "edit"))});
    }
    if (s.log_.size() != s.revision_ || s.replay() != s.working_) {
      throw Error(Errc::kInvalidArgument, "edit log does not replay to the working track");
    }
    if (s.finished_at_) {
      AdjustmentOptions opts;
      opts.span_s = s.duration_s_;
      opts.review_time_s = std::max(0.0, *s.finished_at_ - s.started_at_);
      s.report_ = adjustment_report(s.auto_, s.working_.track(), opts);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kInvalidArgument, std::string("bad session json: ") + e.what());
  }
}

/// Writes through a temporary file and a rename, so readers never see a
/// partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::kIo, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(Errc::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::kIo, "cannot rename " + tmp.string() + ": " + ec.message());
}

/// Session directory: <id>.json per session, <id>.expert.labels.txt once
/// finished. Each session has its own mutex; readers get copies.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir, Clock clock = system_seconds)
      : dir_(std::move(dir)), clock_(std::move(clock)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(Errc::kIo, "cannot create " + dir_.string() + ": " + ec.message());
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
      if (entry.path().extension() != ".json") continue;
      std::ifstream in(entry.path());
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::kIo, entry.path().string() + ": " + e.what());
      }
      auto slot = std::make_shared<Slot>();
      slot->session = session_from_json(j);
      bump_counter(slot->session.id());
      sessions_.emplace(slot->session.id(), std::move(slot));
    }
  }

  const std::filesystem::path& dir() const { return dir_; }
  double now() const { return clock_(); }

  ReviewSession create(const std::string& recording, Quadrant quadrant, const LabelTrack& auto_track,
                       double duration_s) {
    auto slot = std::make_shared<Slot>();
    std::lock_guard lock(map_mu_);
    const std::string id = "r" + std::to_string(++counter_);
    slot->session = ReviewSession(id, recording, quadrant, auto_track, duration_s, clock_());
    persist(slot->session);
    sessions_.emplace(id, slot);
    return slot->session;
  }

  std::vector<std::string> ids() const {
    std::lock_guard lock(map_mu_);
    std::vector<std::string> out;
    for (const auto& [id, slot] : sessions_) out.push_back(id);
    return out;
  }

  ReviewSession get(const std::string& id) const {
    auto slot = find(id);
    std::lock_guard lock(slot->mu);
    return slot->session;
  }

  /// Applies the edit and persists; on any failure the stored session is
  /// left as it was.
  ReviewSession apply(const std::string& id, std::uint64_t revision, const Edit& edit) {
    auto slot = find(id);
    std::lock_guard lock(slot->mu);
    ReviewSession next = slot->session;
    next.apply(revision, edit, clock_());
    persist(next);
    slot->session = std::move(next);
    return slot->session;
  }

  AdjustmentReport finish(const std::string& id, std::optional<double> manual_baseline_s = {}) {
    auto slot = find(id);
    std::lock_guard lock(slot->mu);
    ReviewSession next = slot->session;
    AdjustmentReport report = next.finish(clock_(), manual_baseline_s);
    write_file_atomic(expert_labels_path(id), write_label_track(next.working().track()));
    persist(next);
    slot->session = std::move(next);
    return report;
  }

  std::filesystem::path expert_labels_path(const std::string& id) const {
    return dir_ / (id + ".expert.labels.txt");
  }

  /// Rewrites every session file; used on shutdown.
  void flush() {
    std::vector<std::shared_ptr<Slot>> slots;
    {
      std::lock_guard lock(map_mu_);
      for (const auto& [id, slot] : sessions_) slots.push_back(slot);
    }
    for (const auto& slot : slots) {
      std::lock_guard lock(slot->mu);
      persist(slot->session);
    }
  }

 private:
  struct Slot {
    std::mutex mu;
    ReviewSession session;
  };

  std::shared_ptr<Slot> find(const std::string& id) const {
    std::lock_guard lock(map_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(Errc::kNotFound, "no session '" + id + "'");
    return it->second;
  }

  void persist(const ReviewSession& s) const {
    write_file_atomic(dir_ / (s.id() + ".json"), to_json(s).dump(2) + "\n");
  }

  void bump_counter(const std::string& id) {
    if (id.size() < 2 || id[0] != 'r') return;
    try {
      counter_ = std::max<std::uint64_t>(counter_, std::stoull(id.substr(1)));
    } catch (const std::exception&) {
    }
  }

  std::filesystem::path dir_;
  Clock clock_;
  mutable std::mutex map_mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::uint64_t counter_ = 0;
};

}  // namespace bsannot
