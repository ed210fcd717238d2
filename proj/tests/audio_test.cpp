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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "bsannot/audio.hpp"
#include "bsannot/rng.hpp"
#include "bsannot/wav.hpp"

namespace bsannot {
namespace {

std::vector<std::uint8_t> pcm16_mono(int fs, const std::vector<std::int16_t>& samples) {
  AudioClip dummy(std::vector<double>(samples.size(), 0.0), fs);
  auto bytes = encode_wav(Recording({{Quadrant::kRUQ, dummy}}), SampleFormat::kPcm16);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(samples[i]);
    bytes[44 + 2 * i] = static_cast<std::uint8_t>(v & 0xFF);
    bytes[44 + 2 * i + 1] = static_cast<std::uint8_t>(v >> 8);
  }
  return bytes;
}

Errc error_code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::kInvalidArgument;
}

TEST(Wav, Pcm16IsScaledByFullScale) {
  const auto rec = decode_wav(pcm16_mono(8000, std::vector<std::int16_t>(100, 16384)));
  const auto& clip = rec.channel(Quadrant::kRUQ);
  ASSERT_EQ(clip.size(), 100u);
  for (double s : clip.samples()) EXPECT_EQ(s, 0.5);
}

TEST(Wav, FourChannelsMapToQuadrantsInOrder) {
  const int fs = 2000;
  const std::size_t n = 420 * fs;  // seven minutes
  std::map<Quadrant, AudioClip> chans;
  for (int c = 0; c < 4; ++c) {
    chans.emplace(kQuadrantOrder[c], AudioClip(std::vector<double>(n, 0.125 * c), fs));
  }
  const auto rec = decode_wav(encode_wav(Recording(chans), SampleFormat::kPcm16));
  ASSERT_EQ(rec.channels().size(), 4u);
  int c = 0;
  for (Quadrant q : kQuadrantOrder) {
    const auto& clip = rec.channel(q);
    EXPECT_DOUBLE_EQ(clip.duration_s(), 420.0);
    EXPECT_EQ(clip.samples()[1234], 0.125 * c);
    ++c;
  }
}

TEST(Wav, ZeroFramesIsZeroLength) {
  EXPECT_EQ(error_code_of([] { decode_wav(pcm16_mono(8000, {})); }), Errc::kZeroLength);
}

TEST(Wav, ErrorsAreDistinct) {
  auto good = pcm16_mono(8000, std::vector<std::int16_t>(10, 1));
  auto bad_sig = good;
  bad_sig[0] = 'X';
  EXPECT_EQ(error_code_of([&] { decode_wav(bad_sig); }), Errc::kCorruptHeader);

  auto eight_bit = good;
  eight_bit[34] = 8;  // bits per sample
  EXPECT_EQ(error_code_of([&] { decode_wav(eight_bit); }), Errc::kUnsupportedEncoding);

  auto truncated = std::vector<std::uint8_t>(good.begin(), good.begin() + 30);
  EXPECT_EQ(error_code_of([&] { decode_wav(truncated); }), Errc::kCorruptHeader);

  EXPECT_EQ(error_code_of([] { load_wav("/nonexistent/file.wav"); }), Errc::kIo);
}

TEST(Wav, RoundTripWithinOneLsb) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int channels = static_cast<int>(rng.integer(1, 4));
    const int fs = static_cast<int>(rng.integer(2000, 48000));
    const auto n = static_cast<std::size_t>(rng.integer(1, 5000));
    std::map<Quadrant, AudioClip> chans;
    for (int c = 0; c < channels; ++c) {
      std::vector<double> x(n);
      for (double& v : x) v = rng.uniform(-1.0, 1.0);
      chans.emplace(kQuadrantOrder[c], AudioClip(std::move(x), fs));
    }
    const Recording rec(chans);
    for (auto format : {SampleFormat::kPcm16, SampleFormat::kFloat32}) {
      const auto back = decode_wav(encode_wav(rec, format));
      const double lsb = format == SampleFormat::kPcm16 ? 1.0 / 32768.0 : 1e-7;
      ASSERT_EQ(back.sample_rate(), fs);
      for (const auto& [q, clip] : rec.channels()) {
        const auto a = clip.samples();
        const auto b = back.channel(q).samples();
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) ASSERT_LE(std::abs(a[i] - b[i]), lsb);
      }
    }
  }
}

TEST(Wav, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "bsannot_audio_test.wav";
  const Recording rec({{Quadrant::kRUQ, AudioClip(std::vector<double>(800, 0.25), 8000)}});
  write_wav(path, rec);
  EXPECT_EQ(load_wav(path).channel(Quadrant::kRUQ), rec.channel(Quadrant::kRUQ));
  std::filesystem::remove(path);
}

TEST(AudioClip, RejectsInvalidInput) {
  EXPECT_EQ(error_code_of([] { AudioClip({0.0}, 1000); }), Errc::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { AudioClip({1.5}, 8000); }), Errc::kOutOfRange);
  EXPECT_EQ(AudioClip(std::vector<double>(8000), 8000).frame_len(), 8u);
  EXPECT_EQ(AudioClip(std::vector<double>(44100), 44100).frame_len(), 44u);
}

TEST(Recording, ChannelsMustShareRate) {
  EXPECT_EQ(error_code_of([] { Recording(std::map<Quadrant, AudioClip>{}); }), Errc::kInvalidArgument);
  EXPECT_EQ(error_code_of([] {
              Recording({{Quadrant::kRUQ, AudioClip({0.0}, 8000)},
                         {Quadrant::kLUQ, AudioClip({0.0}, 16000)}});
            }),
            Errc::kInvalidArgument);
}

TEST(Slice, Examples) {
  std::vector<double> x(80000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i % 100) / 100.0;
  const AudioClip clip(x, 8000);
  EXPECT_EQ(slice(clip, 0.0, clip.duration_s()), clip);
  const auto part = slice(clip, 1.0, 1.5);
  EXPECT_EQ(part.size(), 4000u);
  EXPECT_EQ(part.sample_rate(), 8000);
  EXPECT_EQ(part.samples()[0], x[8000]);
  EXPECT_EQ(error_code_of([&] { slice(clip, 2.0, 1.0); }), Errc::kOutOfRange);
  EXPECT_EQ(error_code_of([&] { slice(clip, -0.1, 1.0); }), Errc::kOutOfRange);
  EXPECT_EQ(error_code_of([&] { slice(clip, 0.0, 10.5); }), Errc::kOutOfRange);
}

TEST(Slice, IsCompositionalOnTheSampleGrid) {
  Rng rng(3);
  std::vector<double> x(16000);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  const AudioClip clip(x, 8000);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = rng.integer(0, 15000);
    const auto b = rng.integer(a + 1, 16000);
    const double as = static_cast<double>(a) / 8000.0;
    const double bs = static_cast<double>(b) / 8000.0;
    const auto direct = slice(clip, as, bs);
    ASSERT_EQ(direct.size(), static_cast<std::size_t>(b - a));
    ASSERT_EQ(slice(direct, 0.0, bs - as), direct);
  }
}

}  // namespace
}  // namespace bsannot
