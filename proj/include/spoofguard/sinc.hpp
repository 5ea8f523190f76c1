#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "spoofguard/error.hpp"
#include "spoofguard/lfcc.hpp"
#include "spoofguard/tensor.hpp"

namespace spoofguard {

enum class SincSpacing { mel, linear };

struct SincConfig {
  std::size_t n_filters = 20;
  std::size_t kernel_len = 1024;
  int sample_rate = 16000;
  double min_low_hz = 50.0;
  double min_band_hz = 50.0;
  SincSpacing spacing = SincSpacing::mel;

  void validate() const {
    if (n_filters < 1) throw ConfigError("sinc: n_filters must be >= 1");
    if (kernel_len < 1) throw ConfigError("sinc: kernel_len must be >= 1");
    if (sample_rate <= 0) throw ConfigError("sinc: sample_rate must be positive");
    if (!(min_low_hz > 0.0) || !(min_band_hz >= 0.0)) throw ConfigError("sinc: min_low_hz must be > 0, min_band_hz >= 0");
    if (!(min_low_hz < sample_rate / 2.0 - min_band_hz)) {
      throw ConfigError("sinc: empty frequency range [min_low_hz, sample_rate/2 - min_band_hz]");
    }
  }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// (f1, f2) band edges in Hz for each filter: n_filters + 1 edges spaced on
/// the chosen scale over [min_low_hz, sample_rate/2 - min_band_hz], filter i
/// spanning edges i and i+1.
inline std::vector<std::pair<double, double>> sinc_cutoffs(const SincConfig& cfg) {
  cfg.validate();
  const double lo = cfg.min_low_hz;
  const double hi = cfg.sample_rate / 2.0 - cfg.min_band_hz;
  const bool mel = cfg.spacing == SincSpacing::mel;
  const double a = mel ? hz_to_mel(lo) : lo;
  const double b = mel ? hz_to_mel(hi) : hi;
  std::vector<double> edges(cfg.n_filters + 1);
  for (std::size_t i = 0; i <= cfg.n_filters; ++i) {
    const double v = a + (b - a) * static_cast<double>(i) / static_cast<double>(cfg.n_filters);
    edges[i] = mel ? mel_to_hz(v) : v;
  }
  edges.front() = lo;
  edges.back() = hi;
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < cfg.n_filters; ++i) out.emplace_back(edges[i], edges[i + 1]);
  return out;
}

/// Hamming-windowed ideal band-pass between f1 and f2 (Hz):
///   g[n] = 2 f2 sinc(2 pi f2 n) - 2 f1 sinc(2 pi f1 n), f in cycles/sample,
/// n measured from the kernel centre (half-integer offsets for even lengths).
inline std::vector<double> sinc_bandpass(double f1_hz, double f2_hz, std::size_t len, int sample_rate) {
  if (!(f1_hz >= 0.0 && f1_hz <= f2_hz && f2_hz <= sample_rate / 2.0)) {
    throw InvalidInput("sinc: invalid cutoffs f1=" + std::to_string(f1_hz) + " f2=" + std::to_string(f2_hz));
  }
  const double f1 = f1_hz / sample_rate;
  const double f2 = f2_hz / sample_rate;
  auto lowpass = [](double f, double n) {
    if (n == 0.0) return 2.0 * f;
    const double x = 2.0 * std::numbers::pi * f * n;
    return 2.0 * f * std::sin(x) / x;
  };
  const std::vector<double> win = hamming_window(len);
  const double centre = (static_cast<double>(len) - 1.0) / 2.0;
  std::vector<double> g(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double n = static_cast<double>(i) - centre;
    g[i] = (lowpass(f2, n) - lowpass(f1, n)) * win[i];
  }
  return g;
}

/// Fixed sinc filterbank as conv1d kernels [n_filters, 1, kernel_len].
inline Tensor sinc_kernels(const SincConfig& cfg) {
  const auto cuts = sinc_cutoffs(cfg);
  Tensor k({cfg.n_filters, 1, cfg.kernel_len});
  for (std::size_t i = 0; i < cfg.n_filters; ++i) {
    const auto [f1, f2] = cuts[i];
    if (!(0.0 < f1 && f1 < f2 && f2 < cfg.sample_rate / 2.0)) {
      throw ConfigError("sinc: filter " + std::to_string(i) + " has invalid band [" + std::to_string(f1) + ", " +
                        std::to_string(f2) + "]");
    }
    const std::vector<double> g = sinc_bandpass(f1, f2, cfg.kernel_len, cfg.sample_rate);
    std::copy(g.begin(), g.end(), &k.at(i, 0, 0));
  }
  return k;
}

}  // namespace spoofguard
