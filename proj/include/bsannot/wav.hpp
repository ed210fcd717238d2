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
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "bsannot/audio.hpp"
#include "bsannot/error.hpp"

namespace bsannot {

enum class SampleFormat { kPcm16, kFloat32 };

namespace wav_detail {

inline constexpr std::uint16_t kFormatPcm = 1;
inline constexpr std::uint16_t kFormatFloat = 3;
inline constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
inline void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace wav_detail

/// Decodes a RIFF/WAVE byte buffer. Channel k becomes the k-th quadrant in
/// RUQ, LUQ, RLQ, LLQ order.
inline Recording decode_wav(std::span<const std::uint8_t> bytes) {
  using namespace wav_detail;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(Errc::kCorruptHeader, "missing RIFF/WAVE signature");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || body + len > bytes.size()) {
        throw Error(Errc::kCorruptHeader, "truncated fmt chunk");
      }
      const std::uint8_t* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      sample_rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      if (format == kFormatExtensible) {
        if (len < 26) throw Error(Errc::kCorruptHeader, "truncated extensible fmt chunk");
        format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw Error(Errc::kCorruptHeader, "data chunk before fmt chunk");
      data = bytes.data() + body;
      // Streaming writers leave the length at 0xFFFFFFFF; clamp to the buffer.
      data_len = std::min<std::size_t>(len, bytes.size() - body);
      break;
    }
    pos = body + len + (len & 1u);
  }

  if (!have_fmt) throw Error(Errc::kCorruptHeader, "missing fmt chunk");
  if (data == nullptr) throw Error(Errc::kCorruptHeader, "missing data chunk");
  if (channels < 1 || channels > 4) {
    throw Error(Errc::kUnsupportedEncoding,
                std::to_string(channels) + " channels (expected 1-4)");
  }
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw Error(Errc::kUnsupportedEncoding,
                "format " + std::to_string(format) + " with " + std::to_string(bits) +
                    " bits (expected 16-bit PCM or 32-bit float)");
  }
  if (sample_rate < static_cast<std::uint32_t>(kMinSampleRate) || sample_rate > 1'000'000) {
    throw Error(Errc::kUnsupportedEncoding,
                "sample rate " + std::to_string(sample_rate) + " Hz unsupported");
  }

  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  if (frames == 0) throw Error(Errc::kZeroLength, "WAV has no sample frames");

  std::vector<std::vector<double>> decoded(channels, std::vector<double>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + (i * channels + c) * width;
      double v;
      if (pcm16) {
        v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        v = std::bit_cast<float>(read_u32(p));
        if (!(v >= -1.0 && v <= 1.0)) {
          throw Error(Errc::kOutOfRange, "float sample outside [-1, 1] at frame " +
                                             std::to_string(i));
        }
      }
      decoded[c][i] = v;
    }
  }

  std::map<Quadrant, AudioClip> clips;
  for (std::size_t c = 0; c < channels; ++c) {
    clips.emplace(kQuadrantOrder[c],
                  AudioClip(std::move(decoded[c]), static_cast<int>(sample_rate)));
  }
  return Recording(std::move(clips));
}

inline Recording load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.empty()) throw Error(Errc::kZeroLength, path.string() + " is empty");
  return decode_wav(bytes);
}

/// Interleaves the channels in quadrant order. All channels must have the
/// same length.
inline std::vector<std::uint8_t> encode_wav(const Recording& rec, SampleFormat format) {
  using namespace wav_detail;
  const auto& chans = rec.channels();
  const std::size_t frames = chans.begin()->second.size();
  for (const auto& [q, clip] : chans) {
    if (clip.size() != frames) {
      throw Error(Errc::kInvalidArgument, "channels differ in length");
    }
  }
  const std::uint16_t n = static_cast<std::uint16_t>(chans.size());
  const std::uint16_t bits = format == SampleFormat::kPcm16 ? 16 : 32;
  const std::uint32_t data_len = static_cast<std::uint32_t>(frames * n * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_len);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format == SampleFormat::kPcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, n);
  put_u32(out, static_cast<std::uint32_t>(rec.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(rec.sample_rate()) * n * (bits / 8));
  put_u16(out, static_cast<std::uint16_t>(n * (bits / 8)));
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_len);

  std::vector<std::span<const double>> views;
  for (const auto& [q, clip] : chans) views.push_back(clip.samples());
  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& v : views) {
      if (format == SampleFormat::kPcm16) {
        const long q = std::lround(v[i] * 32768.0);
        put_u16(out, static_cast<std::uint16_t>(
                         static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L))));
      } else {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v[i])));
      }
    }
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const Recording& rec,
                      SampleFormat format = SampleFormat::kPcm16) {
  const auto bytes = encode_wav(rec, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::kIo, "short write to " + path.string());
}

}  // namespace bsannot
