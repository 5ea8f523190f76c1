#pragma once

// Seeded synthetic corpus with a controllable notion of "hard" spoofs.
//
// Bona fide utterances are harmonic voices: a vibrato-modulated f0, a random
// spectral tilt, a syllable-rate amplitude envelope and low background noise.
// A spoof starts from the same kind of voice and receives three parametric
// artifacts, each scaled by an artifact magnitude m:
//   band limiting   x + m*w_bl*(lowpass(x) - x)
//   phase jitter    random-walk noise on the fundamental phase, step m*w_pj*kJitterRad
//   additive tone   a 3-7 kHz sinusoid at m*w_tone*kToneLevel times the voice peak
// The per-attack weights (w_bl, w_pj, w_tone) come from kAttackProfiles.
// m = (1 - difficulty) * U(kNormalMin, 1) for ordinary spoofs and
// m = (1 - difficulty) * kHardScale for the hard_fraction share of hard ones.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "spoofguard/error.hpp"
#include "spoofguard/protocol.hpp"
#include "spoofguard/fft.hpp"
#include "spoofguard/waveform.hpp"

namespace spoofguard {

struct SynthConfig {
  std::size_t n_bonafide = 258;  ///< 2580 / 10
  std::size_t n_spoof = 2280;    ///< 22800 / 10
  std::size_t utterance_len = kDefaultUtteranceSamples;
  double difficulty = 0.5;
  double hard_fraction = 0.2;
  std::uint64_t seed = 0;
  int sample_rate = kDefaultSampleRate;
  std::size_t n_speakers = 20;
  std::vector<std::string> attacks = {"A01", "A02", "A03", "A04", "A05", "A06"};
  std::string id_prefix = "SG";

  void validate() const {
    if (n_bonafide < 1 || n_spoof < 1) throw ConfigError("synth: n_bonafide and n_spoof must be >= 1");
    if (utterance_len < 1) throw ConfigError("synth: utterance_len must be >= 1");
    if (!(difficulty >= 0.0 && difficulty <= 1.0)) throw ConfigError("synth: difficulty must lie in [0,1]");
    if (!(hard_fraction >= 0.0 && hard_fraction <= 1.0)) throw ConfigError("synth: hard_fraction must lie in [0,1]");
    if (sample_rate <= 0) throw ConfigError("synth: sample_rate must be positive");
    if (n_speakers < 1) throw ConfigError("synth: n_speakers must be >= 1");
    if (attacks.empty()) throw ConfigError("synth: attack set is empty");
    for (const auto& a : attacks)
      if (a == "-" || a.empty()) throw ConfigError("synth: invalid attack id '" + a + "'");
  }
};

struct SyntheticDataset {
  std::vector<Waveform> waveforms;
  std::vector<TrialRecord> trials;
};

namespace synth_detail {

inline constexpr double kNormalMin = 0.6;
inline constexpr double kHardScale = 0.1;
inline constexpr double kJitterRad = 0.02;
inline constexpr double kToneLevel = 0.35;
inline constexpr double kNoiseStd = 0.004;

struct ArtifactWeights {
  double band_limit, phase_jitter, tone;
};

inline constexpr std::array<ArtifactWeights, 6> kAttackProfiles{{
    {1.0, 0.3, 0.3},
    {0.3, 1.0, 0.3},
    {0.3, 0.3, 1.0},
    {1.0, 1.0, 0.0},
    {0.0, 1.0, 1.0},
    {1.0, 0.0, 1.0},
}};

struct Artifacts {
  double band_limit = 0.0;
  double phase_jitter = 0.0;
  double tone = 0.0;
};

inline std::mt19937_64 utterance_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

/// sin(phase + n * step) for n = 0, 1, ... by complex rotation.
class Oscillator {
 public:
  Oscillator(double step, double phase)
      : c_(std::cos(phase)), s_(std::sin(phase)), cw_(std::cos(step)), sw_(std::sin(step)) {}

  double next() {
    const double out = s_;
    const double c = c_ * cw_ - s_ * sw_;
    s_ = s_ * cw_ + c_ * sw_;
    c_ = c;
    return out;
  }

 private:
  double c_, s_, cw_, sw_;
};

inline Waveform render(std::mt19937_64& rng, std::size_t len, int sr, std::size_t speaker, const Artifacts& art) {
  using std::numbers::pi;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double fs = static_cast<double>(sr);

  const double f0 = 95.0 + 7.0 * static_cast<double>(speaker % 20) + 20.0 * u01(rng);
  const double vib_rate = 4.0 + 2.0 * u01(rng);
  const double vib_phase = 2.0 * pi * u01(rng);
  const double tilt = 0.8 + 0.5 * u01(rng);
  const double env_rate = 2.0 + 3.0 * u01(rng);
  const double env_phase = 2.0 * pi * u01(rng);
  const double peak = 0.2 + 0.4 * u01(rng);

  std::size_t n_harm = 1;
  while (static_cast<double>(n_harm + 1) * f0 * 1.03 < 0.45 * fs) ++n_harm;
  // One period of sum_k a_k sin(k*theta + phi_k), tabulated with an inverse
  // FFT and read back at the running phase.
  constexpr std::size_t kTable = 8192;
  std::vector<cdouble> spec(kTable, 0.0);
  for (std::size_t k = 0; k < n_harm; ++k) {
    const double a = std::pow(static_cast<double>(k + 1), -tilt) * (0.7 + 0.6 * u01(rng));
    spec[k + 1] = std::conj(std::polar(a, 2.0 * pi * u01(rng)));
  }
  static const FftPlan plan(kTable);
  plan.forward(spec);
  std::vector<double> table(kTable + 1);
  for (std::size_t i = 0; i < kTable; ++i) table[i] = -spec[i].imag();
  table[kTable] = table[0];

  // Jitter perturbs the fundamental's phase, so harmonic k sees k times the
  // deviation.
  const double jitter_step = art.phase_jitter * kJitterRad;
  const double two_pi = 2.0 * pi;
  std::vector<double> x(len);
  Oscillator vibrato(two_pi * vib_rate / fs, vib_phase);
  Oscillator envelope(two_pi * env_rate / fs, env_phase);
  double theta = 0.0;
  for (std::size_t n = 0; n < len; ++n) {
    const double f = f0 * (1.0 + 0.02 * vibrato.next());
    theta += two_pi * f / fs;
    if (jitter_step > 0.0) theta += jitter_step * gauss(rng);
    while (theta >= two_pi) theta -= two_pi;
    while (theta < 0.0) theta += two_pi;
    const double pos = theta / two_pi * static_cast<double>(kTable);
    const auto i0 = std::min(static_cast<std::size_t>(pos), kTable - 1);
    const double frac = pos - static_cast<double>(i0);
    const double sample = table[i0] + frac * (table[i0 + 1] - table[i0]);
    x[n] = sample * (0.55 + 0.45 * envelope.next());
  }
  double mx = 0.0;
  for (double v : x) mx = std::max(mx, std::abs(v));
  const double gain = mx > 0.0 ? peak / mx : 0.0;
  for (double& v : x) v *= gain;

  if (art.band_limit > 0.0) {
    const double cutoff = 2500.0;
    const double alpha = 1.0 - std::exp(-2.0 * pi * cutoff / fs);
    double y = 0.0;
    for (double& v : x) {
      y += alpha * (v - y);
      v += art.band_limit * (y - v);
    }
  }
  if (art.tone > 0.0) {
    const double tone_f = 3000.0 + 4000.0 * u01(rng);
    const double tone_ph = 2.0 * pi * u01(rng);
    const double level = art.tone * kToneLevel * peak;
    Oscillator tone(2.0 * pi * tone_f / fs, tone_ph);
    for (double& v : x) v += level * tone.next();
  }
  for (double& v : x) v = std::clamp(v + kNoiseStd * gauss(rng), -1.0, 32767.0 / 32768.0);

  Waveform w;
  w.samples = std::move(x);
  w.sample_rate = sr;
  return w;
}

inline std::string make_id(const std::string& prefix, const char* tag, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%s_%07zu", tag, i);
  return prefix + buf;
}

}  // namespace synth_detail

/// Which spoofs (by 0-based spoof index) get the hard, smallest-magnitude
/// artifacts: the first round(hard_fraction * n_spoof) of a seeded permutation.
inline std::vector<bool> hard_spoof_mask(const SynthConfig& cfg) {
  const auto n_hard = static_cast<std::size_t>(std::llround(cfg.hard_fraction * static_cast<double>(cfg.n_spoof)));
  std::vector<std::size_t> order(cfg.n_spoof);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng = synth_detail::utterance_rng(cfg.seed, 0xFFFFFFFFull);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> hard(cfg.n_spoof, false);
  for (std::size_t i = 0; i < n_hard; ++i) hard[order[i]] = true;
  return hard;
}

/// Deterministic in cfg: bona fide trials first, then spoofs with attack ids
/// assigned round robin.
inline SyntheticDataset generate_synthetic_dataset(const SynthConfig& cfg) {
  cfg.validate();
  using namespace synth_detail;
  SyntheticDataset ds;
  const std::size_t total = cfg.n_bonafide + cfg.n_spoof;
  ds.waveforms.reserve(total);
  ds.trials.reserve(total);
  const std::vector<bool> hard = hard_spoof_mask(cfg);
  const double scale = 1.0 - cfg.difficulty;

  for (std::size_t i = 0; i < total; ++i) {
    std::mt19937_64 rng = utterance_rng(cfg.seed, i);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const std::size_t speaker = rng() % cfg.n_speakers;
    TrialRecord r;
    char spk[32];
    std::snprintf(spk, sizeof(spk), "_%04zu", speaker);
    r.speaker_id = cfg.id_prefix + spk;
    Artifacts art;
    if (i < cfg.n_bonafide) {
      r.utterance_id = make_id(cfg.id_prefix, "B", i);
      r.key = Key::bonafide;
      r.attack_id = "-";
    } else {
      const std::size_t j = i - cfg.n_bonafide;
      const std::size_t a = j % cfg.attacks.size();
      r.utterance_id = make_id(cfg.id_prefix, "S", j);
      r.key = Key::spoof;
      r.attack_id = cfg.attacks[a];
      const double m = hard[j] ? scale * kHardScale : scale * (kNormalMin + (1.0 - kNormalMin) * u01(rng));
      const ArtifactWeights& w = kAttackProfiles[a % kAttackProfiles.size()];
      art = {m * w.band_limit, m * w.phase_jitter, m * w.tone};
    }
    ds.waveforms.push_back(render(rng, cfg.utterance_len, cfg.sample_rate, speaker, art));
    ds.trials.push_back(std::move(r));
  }
  return ds;
}

}  // namespace spoofguard
