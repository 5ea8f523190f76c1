#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "spoofguard/error.hpp"

namespace spoofguard {

using cdouble = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Iterative radix-2 decimation-in-time FFT, X[k] = sum_n x[n] e^{-2 pi i k n / N}.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n), bitrev_(n), twiddle_(n / 2) {
    if (!is_power_of_two(n)) throw InvalidInput("fft size " + std::to_string(n) + " is not a power of two");
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      bitrev_[i] = r;
    }
    for (std::size_t k = 0; k < n / 2; ++k) {
      twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    }
  }

  std::size_t size() const noexcept { return n_; }

  void forward(std::span<cdouble> x) const {
    if (x.size() != n_) throw InvalidInput("fft input length " + std::to_string(x.size()) + " != plan size " + std::to_string(n_));
    for (std::size_t i = 0; i < n_; ++i)
      if (i < bitrev_[i]) std::swap(x[i], x[bitrev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          const cdouble t = twiddle_[j * stride] * x[start + j + half];
          x[start + j + half] = x[start + j] - t;
          x[start + j] += t;
        }
      }
    }
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<cdouble> twiddle_;
};

inline std::vector<cdouble> fft(std::span<const double> frame) {
  std::vector<cdouble> x(frame.begin(), frame.end());
  FftPlan(x.size()).forward(x);
  return x;
}

/// Direct O(N^2) evaluation of the DFT definition; the oracle for FftPlan.
inline std::vector<cdouble> reference_dft(std::span<const double> frame) {
  const std::size_t n = frame.size();
  std::vector<cdouble> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cdouble acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce k*t mod n first so the angle stays accurate for large n.
      const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += frame[t] * cdouble(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace spoofguard
