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

#include <cstdint>
#include <vector>

#include "bsannot/patterns.hpp"
#include "bsannot/rng.hpp"

namespace bsannot::testing {

/// Sorted, disjoint track of n segments with random labels, lengths and gaps,
/// all on a 1 ms grid unless fine_grid is set (then 1 us).
inline LabelTrack random_track(Rng& rng, std::size_t n, bool with_none = true, bool fine_grid = false,
                               TrackSource source = TrackSource::kManual) {
  const std::int64_t unit = fine_grid ? 1 : 1000;
  std::vector<Segment> out;
  std::int64_t t = rng.integer(0, 500) * unit;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t len = rng.integer(1, 2000) * unit;
    const auto label = with_none ? kAllLabels[static_cast<std::size_t>(rng.integer(0, 4))]
                                 : kPatternLabels[static_cast<std::size_t>(rng.integer(0, 3))];
    std::optional<double> conf;
    if (rng.uniform() < 0.3) conf = static_cast<double>(rng.integer(0, 1000)) / 1000.0;
    out.emplace_back(t, t + len, label, conf);
    t += len + rng.integer(0, 400) * unit;
  }
  return LabelTrack(std::move(out), source);
}

}  // namespace bsannot::testing
