#pragma once

// Linear-frequency cepstral coefficients:
//   frames -> Hamming -> |DFT|^2 -> linear triangular filterbank
//   -> log(max(E, floor)) -> orthonormal DCT-II -> [static | delta | delta-delta]

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "spoofguard/error.hpp"
#include "spoofguard/fft.hpp"
#include "spoofguard/waveform.hpp"

namespace spoofguard {

/// Row-major real matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Coefficients x frames.
using FeatureMatrix = Matrix;

struct FrontendConfig {
  double win_ms = 20.0;
  double hop_ms = 10.0;
  std::size_t n_fft = 512;
  std::size_t n_filters = 20;
  std::size_t n_ceps = 20;
  std::size_t delta_width = 2;
  double log_floor = 1e-10;
  double pre_emphasis = 0.0;  ///< y[n] = x[n] - a x[n-1]; 0 disables

  std::size_t win_samples(int sample_rate) const {
    return static_cast<std::size_t>(std::llround(win_ms * sample_rate / 1000.0));
  }
  std::size_t hop_samples(int sample_rate) const {
    return static_cast<std::size_t>(std::llround(hop_ms * sample_rate / 1000.0));
  }
  std::size_t n_coeffs() const { return 3 * n_ceps; }

  void validate(int sample_rate) const {
    if (sample_rate <= 0) throw ConfigError("frontend: sample rate must be positive");
    if (!(hop_ms > 0.0) || !(win_ms >= hop_ms)) throw ConfigError("frontend: need win_ms >= hop_ms > 0");
    if (hop_samples(sample_rate) == 0) throw ConfigError("frontend: hop shorter than one sample");
    if (!is_power_of_two(n_fft)) throw ConfigError("frontend: n_fft must be a power of two");
    if (n_fft < win_samples(sample_rate)) {
      throw ConfigError("frontend: n_fft " + std::to_string(n_fft) + " shorter than window " +
                        std::to_string(win_samples(sample_rate)));
    }
    if (n_filters < 1 || n_ceps < 1 || n_ceps > n_filters) throw ConfigError("frontend: need 1 <= n_ceps <= n_filters");
    if (delta_width < 1) throw ConfigError("frontend: delta_width must be >= 1");
    if (!(log_floor > 0.0)) throw ConfigError("frontend: log_floor must be positive");
    if (!(pre_emphasis >= 0.0 && pre_emphasis < 1.0)) throw ConfigError("frontend: pre_emphasis must lie in [0,1)");
  }
};

inline std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n == 1) return w;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return w;
}

inline std::size_t frame_count(std::size_t len, std::size_t win, std::size_t hop) {
  if (len < win) throw InvalidInput("signal of " + std::to_string(len) + " samples shorter than one window (" + std::to_string(win) + ")");
  return (len - win) / hop + 1;
}

/// Windowed frames as a (window length) x (n_frames) matrix; column t starts
/// at sample t * hop.
inline Matrix frame_signal(const Waveform& w, const FrontendConfig& cfg) {
  cfg.validate(w.sample_rate);
  const std::size_t win = cfg.win_samples(w.sample_rate);
  const std::size_t hop = cfg.hop_samples(w.sample_rate);
  const std::size_t n = frame_count(w.samples.size(), win, hop);
  const std::vector<double> window = hamming_window(win);
  Matrix out(win, n);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t i = 0; i < win; ++i) out(i, t) = w.samples[t * hop + i] * window[i];
  return out;
}

/// Triangular filters with edges uniformly spaced over bins [0, n_fft/2];
/// filter k rises from edge k, peaks at edge k+1 and falls to edge k+2.
inline Matrix linear_filterbank(std::size_t n_filters, std::size_t n_fft, int sample_rate) {
  if (n_filters < 1) throw InvalidInput("filterbank: n_filters must be >= 1");
  if (sample_rate <= 0) throw InvalidInput("filterbank: sample rate must be positive");
  const std::size_t n_bins = n_fft / 2 + 1;
  const double spacing = static_cast<double>(n_fft / 2) / static_cast<double>(n_filters + 1);
  if (spacing < 1.0) {
    throw InvalidInput("filterbank: " + std::to_string(n_filters) + " filters too many for n_fft " +
                       std::to_string(n_fft) + " (centre spacing below one bin)");
  }
  Matrix fb(n_filters, n_bins, 0.0);
  for (std::size_t k = 0; k < n_filters; ++k) {
    const double lo = spacing * static_cast<double>(k);
    const double c = spacing * static_cast<double>(k + 1);
    const double hi = spacing * static_cast<double>(k + 2);
    for (std::size_t j = 0; j < n_bins; ++j) {
      const double f = static_cast<double>(j);
      double v = 0.0;
      if (f > lo && f <= c) v = (f - lo) / (c - lo);
      else if (f > c && f < hi) v = (hi - f) / (hi - c);
      fb(k, j) = v;
    }
  }
  return fb;
}

/// Centre frequency of filter k in Hz.
inline double filter_center_hz(std::size_t k, std::size_t n_filters, std::size_t n_fft, int sample_rate) {
  const double spacing = static_cast<double>(n_fft / 2) / static_cast<double>(n_filters + 1);
  return spacing * static_cast<double>(k + 1) * sample_rate / static_cast<double>(n_fft);
}

/// Orthonormal DCT-II basis, rows = output coefficients.
inline Matrix dct2_matrix(std::size_t n_out, std::size_t n_in) {
  Matrix d(n_out, n_in);
  const double n = static_cast<double>(n_in);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double s = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t i = 0; i < n_in; ++i) {
      d(k, i) = s * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) / (2.0 * n));
    }
  }
  return d;
}

/// Regression deltas along frames with replicate padding:
///   d_t = sum_{n=1..W} n (c_{t+n} - c_{t-n}) / (2 sum n^2)
inline Matrix compute_deltas(const Matrix& c, std::size_t width) {
  if (width < 1) throw InvalidInput("deltas: width must be >= 1");
  Matrix d(c.rows, c.cols, 0.0);
  if (c.cols == 0) return d;
  double denom = 0.0;
  for (std::size_t n = 1; n <= width; ++n) denom += static_cast<double>(n * n);
  denom *= 2.0;
  const auto last = static_cast<std::ptrdiff_t>(c.cols) - 1;
  for (std::size_t r = 0; r < c.rows; ++r)
    for (std::ptrdiff_t t = 0; t <= last; ++t) {
      double acc = 0.0;
      for (std::size_t n = 1; n <= width; ++n) {
        const auto sn = static_cast<std::ptrdiff_t>(n);
        const std::size_t fwd = static_cast<std::size_t>(std::min(t + sn, last));
        const std::size_t back = static_cast<std::size_t>(std::max(t - sn, std::ptrdiff_t{0}));
        acc += static_cast<double>(n) * (c(r, fwd) - c(r, back));
      }
      d(r, static_cast<std::size_t>(t)) = acc / denom;
    }
  return d;
}

/// Reusable extractor; holds the FFT plan, filterbank and DCT basis
/// for one (config, sample rate) pair. Stateless once built, so a single
/// instance may serve several threads.
class LfccExtractor {
 public:
  LfccExtractor(FrontendConfig cfg, int sample_rate)
      : cfg_(cfg),
        sample_rate_(sample_rate),
        plan_((cfg.validate(sample_rate), cfg.n_fft)),
        filterbank_(linear_filterbank(cfg.n_filters, cfg.n_fft, sample_rate)),
        dct_(dct2_matrix(cfg.n_ceps, cfg.n_filters)) {
    // Non-zero support of each triangle, to skip empty bins.
    for (std::size_t k = 0; k < filterbank_.rows; ++k) {
      std::size_t lo = filterbank_.cols, hi = 0;
      for (std::size_t j = 0; j < filterbank_.cols; ++j)
        if (filterbank_(k, j) != 0.0) {
          lo = std::min(lo, j);
          hi = j + 1;
        }
      support_.push_back({lo, std::max(lo, hi)});
    }
  }

  const FrontendConfig& config() const noexcept { return cfg_; }
  int sample_rate() const noexcept { return sample_rate_; }
  const Matrix& filterbank() const noexcept { return filterbank_; }

  /// |X[k]|^2 for k in [0, n_fft/2] of one frame (zero padded to n_fft).
  std::vector<double> power_spectrum(std::span<const double> frame) const {
    std::vector<cdouble> buf(cfg_.n_fft, 0.0);
    std::copy(frame.begin(), frame.end(), buf.begin());
    plan_.forward(buf);
    std::vector<double> p(cfg_.n_fft / 2 + 1);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::norm(buf[k]);
    return p;
  }

  std::vector<double> band_energies(std::span<const double> power) const {
    std::vector<double> e(filterbank_.rows, 0.0);
    for (std::size_t k = 0; k < filterbank_.rows; ++k)
      for (std::size_t j = support_[k].first; j < support_[k].second; ++j) e[k] += filterbank_(k, j) * power[j];
    return e;
  }

  /// Filterbank energies, n_filters x n_frames.
  Matrix filterbank_energies(const Waveform& w) const {
    check_rate(w);
    const Matrix frames = frame_signal(emphasized(w), cfg_);
    Matrix out(cfg_.n_filters, frames.cols);
    std::vector<double> frame(frames.rows);
    for (std::size_t t = 0; t < frames.cols; ++t) {
      for (std::size_t i = 0; i < frames.rows; ++i) frame[i] = frames(i, t);
      const std::vector<double> e = band_energies(power_spectrum(frame));
      for (std::size_t k = 0; k < e.size(); ++k) out(k, t) = e[k];
    }
    return out;
  }

  /// Static cepstra, n_ceps x n_frames.
  Matrix cepstra(const Waveform& w) const {
    const Matrix e = filterbank_energies(w);
    Matrix out(cfg_.n_ceps, e.cols);
    std::vector<double> logs(e.rows);
    for (std::size_t t = 0; t < e.cols; ++t) {
      for (std::size_t k = 0; k < e.rows; ++k) logs[k] = std::log(std::max(e(k, t), cfg_.log_floor));
      for (std::size_t q = 0; q < cfg_.n_ceps; ++q) {
        double acc = 0.0;
        for (std::size_t k = 0; k < e.rows; ++k) acc += dct_(q, k) * logs[k];
        out(q, t) = acc;
      }
    }
    return out;
  }

  /// [static | delta | delta-delta], 3*n_ceps x n_frames.
  FeatureMatrix operator()(const Waveform& w) const { return stack_deltas(cepstra(w), cfg_.delta_width); }

  static FeatureMatrix stack_deltas(const Matrix& stat, std::size_t width) {
    const Matrix d1 = compute_deltas(stat, width);
    const Matrix d2 = compute_deltas(d1, width);
    FeatureMatrix out(3 * stat.rows, stat.cols);
    std::copy(stat.data.begin(), stat.data.end(), out.data.begin());
    std::copy(d1.data.begin(), d1.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(stat.data.size()));
    std::copy(d2.data.begin(), d2.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(2 * stat.data.size()));
    return out;
  }

 private:
  void check_rate(const Waveform& w) const {
    if (w.sample_rate != sample_rate_) {
      throw InvalidInput("lfcc: waveform at " + std::to_string(w.sample_rate) + " Hz, extractor built for " +
                         std::to_string(sample_rate_) + " Hz");
    }
  }

  Waveform emphasized(const Waveform& w) const {
    if (cfg_.pre_emphasis == 0.0) return w;
    Waveform out = w;
    for (std::size_t n = out.samples.size(); n-- > 1;) out.samples[n] -= cfg_.pre_emphasis * w.samples[n - 1];
    return out;
  }

  FrontendConfig cfg_;
  int sample_rate_;
  FftPlan plan_;
  Matrix filterbank_;
  Matrix dct_;
  std::vector<std::pair<std::size_t, std::size_t>> support_;
};

inline FeatureMatrix lfcc(const Waveform& w, const FrontendConfig& cfg = {}) {
  return LfccExtractor(cfg, w.sample_rate)(w);
}

}  // namespace spoofguard
