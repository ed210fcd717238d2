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
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "bsannot/error.hpp"

namespace bsannot::dsp {

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Periodic Hann window.
inline std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

/// Lower median: for even sizes the smaller of the two central values.
inline double lower_median(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::kInvalidArgument, "median of empty series");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

inline double lower_median(std::span<const double> values) {
  return lower_median(std::vector<double>(values.begin(), values.end()));
}

/// Power spectrum of a real frame: |X_k|^2 for k = 0..n/2, computed with an
/// n/2-point complex FFT. n must be a power of two >= 4.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n), half_(n / 2) {
    if (n < 4 || (n & (n - 1)) != 0) {
      throw Error(Errc::kInvalidArgument, "FFT size must be a power of two >= 4");
    }
    twiddle_.resize(half_ / 2 + 1);
    for (std::size_t k = 0; k < twiddle_.size(); ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(half_);
      twiddle_[k] = {std::cos(a), std::sin(a)};
    }
    split_.resize(half_ + 1);
    for (std::size_t k = 0; k <= half_; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_);
      split_[k] = {std::cos(a), std::sin(a)};
    }
    bitrev_.resize(half_);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < half_) ++bits;
    for (std::size_t i = 0; i < half_; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
      bitrev_[i] = r;
    }
    buf_.resize(half_);
  }

  std::size_t size() const { return n_; }
  std::size_t bins() const { return half_ + 1; }

  /// input.size() == size(); power.size() == bins().
  void power(std::span<const double> input, std::span<double> power) {
    for (std::size_t i = 0; i < half_; ++i) {
      buf_[bitrev_[i]] = {input[2 * i], input[2 * i + 1]};
    }
    for (std::size_t len = 2; len <= half_; len <<= 1) {
      const std::size_t step = half_ / len;
      for (std::size_t s = 0; s < half_; s += len) {
        for (std::size_t k = 0; k < len / 2; ++k) {
          const auto w = twiddle_[k * step];
          const auto u = buf_[s + k];
          const auto v = buf_[s + k + len / 2] * w;
          buf_[s + k] = u + v;
          buf_[s + k + len / 2] = u - v;
        }
      }
    }
    // Untangle the even/odd packed transform into the real spectrum.
    for (std::size_t k = 0; k <= half_; ++k) {
      const auto zk = buf_[k % half_];
      const auto zc = std::conj(buf_[(half_ - k) % half_]);
      const auto even = 0.5 * (zk + zc);
      const auto odd = std::complex<double>(0.0, -0.5) * (zk - zc);
      power[k] = std::norm(even + split_[k] * odd);
    }
  }

 private:
  std::size_t n_;
  std::size_t half_;
  std::vector<std::complex<double>> twiddle_;
  std::vector<std::complex<double>> split_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<double>> buf_;
};

/// Centered moving average of odd width; the window is truncated at the edges.
inline std::vector<double> moving_average(std::span<const double> x, int width) {
  if (width < 1 || width % 2 == 0) {
    throw Error(Errc::kInvalidArgument, "smoothing width must be a positive odd number");
  }
  const std::ptrdiff_t half = width / 2;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> out(x.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half);
    const std::ptrdiff_t hi = std::min(n, i + half + 1);
    double sum = 0.0;
    for (std::ptrdiff_t j = lo; j < hi; ++j) sum += x[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i)] = sum / static_cast<double>(hi - lo);
  }
  return out;
}

}  // namespace bsannot::dsp
