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

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "bsannot/postproc.hpp"
#include "test_support.hpp"

namespace bsannot {
namespace {

using L = PatternLabel;

Segment ms(std::int64_t a, std::int64_t b, L l) { return Segment(a * 1000, b * 1000, l); }

std::string read_file(const std::string& name) {
  std::ifstream in(std::string(BSANNOT_TEST_DATA) + "/" + name, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Refine, WorkedGapFillExample) {
  const auto out = refine(LabelTrack({ms(0, 1000, L::kSB), ms(1500, 2000, L::kMB)}), 2.0);
  EXPECT_EQ(out, LabelTrack({ms(0, 1000, L::kSB), ms(1000, 1500, L::kNone), ms(1500, 2000, L::kMB)}));
}

TEST(Refine, GoldenFile) {
  const auto in = parse_label_track(read_file("gapfill_input.txt"));
  EXPECT_EQ(write_label_track(refine(in, 2.0)), read_file("gapfill_golden.txt"));
}

TEST(Refine, AdjacentSameLabelMerges) {
  EXPECT_EQ(refine(LabelTrack({ms(0, 1000, L::kSB), ms(1000, 2000, L::kSB)}), 2.0),
            LabelTrack({ms(0, 2000, L::kSB)}));
}

TEST(Refine, ShortGapLeftAlone) {
  const LabelTrack t({ms(0, 1000, L::kSB), ms(1050, 2000, L::kSB)});
  EXPECT_EQ(refine(t, 2.0), t);
}

TEST(Refine, BoundaryAtExactlyTheThreshold) {
  // 100 ms gap stays open, 101 ms is filled.
  EXPECT_EQ(refine(LabelTrack({ms(0, 20, L::kSB), ms(120, 140, L::kSB)}), 0.14).size(), 2u);
  const auto filled = refine(LabelTrack({ms(0, 20, L::kSB), ms(121, 141, L::kSB)}), 0.141);
  ASSERT_EQ(filled.size(), 3u);
  EXPECT_EQ(filled[1], ms(20, 121, L::kNone));
  // The same holds at the recording edges.
  EXPECT_EQ(refine(LabelTrack({ms(100, 120, L::kSB)}), 0.22).size(), 1u);
  EXPECT_EQ(refine(LabelTrack({ms(101, 121, L::kSB)}), 0.222).size(), 3u);
}

TEST(Refine, EmptyTrackBecomesOneNone) {
  const auto once = refine(LabelTrack{}, 5.0);
  EXPECT_EQ(once, LabelTrack({ms(0, 5000, L::kNone)}));
  EXPECT_EQ(refine(once, 5.0), once);
}

TEST(Refine, MergesFilledGapIntoNoneNeighbours) {
  const auto out = refine(LabelTrack({ms(0, 500, L::kNone), ms(800, 820, L::kSB)}), 1.0);
  EXPECT_EQ(out, LabelTrack({ms(0, 800, L::kNone), ms(800, 820, L::kSB), ms(820, 1000, L::kNone)}));
}

TEST(Refine, MergeGapConfig) {
  PostprocConfig cfg;
  cfg.merge_max_gap_ms = 60;
  const auto out = refine(LabelTrack({ms(0, 1000, L::kSB), ms(1050, 2000, L::kSB)}), 2.0, cfg);
  EXPECT_EQ(out, LabelTrack({ms(0, 2000, L::kSB)}));
}

TEST(Refine, MergedConfidenceIsMax) {
  const auto out = refine(LabelTrack({Segment(0, 10, L::kSB, 0.4), Segment(10, 20, L::kSB, 0.9)}), 0.00002);
  EXPECT_EQ(*out[0].confidence(), 0.9);
}

TEST(Refine, RejectsSegmentBeyondTotal) {
  EXPECT_THROW(refine(LabelTrack({ms(0, 2001, L::kSB)}), 2.0), Error);
  PostprocConfig bad;
  bad.gap_fill_min_ms = -1;
  EXPECT_THROW(refine(LabelTrack{}, 1.0, bad), Error);
}

TEST(Refine, KeepsSource) {
  EXPECT_EQ(refine(LabelTrack({}, TrackSource::kAuto), 1.0).source(), TrackSource::kAuto);
}

// Label at time t (us), or nullopt when unlabeled.
std::optional<L> label_at(const LabelTrack& t, std::int64_t us) {
  for (const Segment& s : t.segments()) {
    if (s.start_us() <= us && us < s.end_us()) return s.label();
  }
  return std::nullopt;
}

TEST(Refine, PropertiesOnRandomTracks) {
  Rng rng(77);
  for (int i = 0; i < 1000; ++i) {
    const auto t = testing::random_track(rng, static_cast<std::size_t>(rng.integer(0, 30)), true, i % 2 == 0);
    const double total = static_cast<double>(t.span_us() + rng.integer(0, 300000)) / 1e6;
    PostprocConfig cfg;
    cfg.merge_max_gap_ms = static_cast<int>(rng.integer(0, 2)) * 50;
    ASSERT_TRUE(refine_idempotent_check(t, total, cfg));
    const auto out = refine(t, total, cfg);
    // Coverage: residual gaps never exceed the fill threshold.
    std::int64_t cursor = 0;
    for (const Segment& s : out.segments()) {
      EXPECT_LE(s.start_us() - cursor, 100000);
      cursor = s.end_us();
    }
    EXPECT_LE(seconds_to_us(total) - cursor, 100000);
    // Conservation: every originally labelled instant keeps its label.
    for (int k = 0; k < 50; ++k) {
      const std::int64_t us = rng.integer(0, std::max<std::int64_t>(0, seconds_to_us(total) - 1));
      const auto before = label_at(t, us);
      const auto after = label_at(out, us);
      if (before) {
        EXPECT_EQ(after, before);
      } else if (after && cfg.merge_max_gap_ms == 0) {
        EXPECT_EQ(*after, L::kNone);
      }
    }
  }
}

}  // namespace
}  // namespace bsannot
