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

#include <stdexcept>
#include <string>
#include <string_view>

namespace bsannot {

enum class Errc {
  kInvalidArgument,
  kOutOfRange,
  kUnsupportedEncoding,
  kZeroLength,
  kCorruptHeader,
  kIo,
  kTooShort,
  kSilentBaseline,
  kMalformedLine,
  kUnknownLabel,
  kOverlap,
  kNonPositiveDuration,
  kSingleClass,
  kEmptySegment,
  kTransport,
  kMalformedReply,
  kTimeout,
  kSpanMismatch,
  kUnknownSegment,
  kStaleRevision,
  kAlreadyFinished,
  kNotFound,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kInvalidArgument: return "invalid_argument";
    case Errc::kOutOfRange: return "out_of_range";
    case Errc::kUnsupportedEncoding: return "unsupported_encoding";
    case Errc::kZeroLength: return "zero_length";
    case Errc::kCorruptHeader: return "corrupt_header";
    case Errc::kIo: return "io";
    case Errc::kTooShort: return "too_short";
    case Errc::kSilentBaseline: return "silent_baseline";
    case Errc::kMalformedLine: return "malformed_line";
    case Errc::kUnknownLabel: return "unknown_label";
    case Errc::kOverlap: return "overlap";
    case Errc::kNonPositiveDuration: return "non_positive_duration";
    case Errc::kSingleClass: return "single_class";
    case Errc::kEmptySegment: return "empty_segment";
    case Errc::kTransport: return "transport";
    case Errc::kMalformedReply: return "malformed_reply";
    case Errc::kTimeout: return "timeout";
    case Errc::kSpanMismatch: return "span_mismatch";
    case Errc::kUnknownSegment: return "unknown_segment";
    case Errc::kStaleRevision: return "stale_revision";
    case Errc::kAlreadyFinished: return "already_finished";
    case Errc::kNotFound: return "not_found";
  }
  return "unknown";
}

// Every failure raised by the library carries one of the codes above so
// callers (CLI, review service) can map it to exit codes or HTTP statuses.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace bsannot
