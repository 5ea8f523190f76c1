#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spoofguard/binary_io.hpp"
#include "spoofguard/error.hpp"

namespace spoofguard {

inline constexpr int kDefaultSampleRate = 16000;
/// Roughly four seconds at 16 kHz; the model's input length.
inline constexpr std::size_t kDefaultUtteranceSamples = 64600;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const noexcept { return samples.size(); }

  void validate() const {
    if (samples.empty()) throw InvalidInput("waveform is empty");
    if (sample_rate <= 0) throw InvalidInput("waveform sample rate must be positive");
    for (double s : samples)
      if (!std::isfinite(s)) throw InvalidInput("waveform contains non-finite samples");
  }
};

/// Truncates to the first `target` samples, or tiles the signal end to end
/// and truncates when it is shorter.
inline Waveform fix_length(const Waveform& w, std::size_t target) {
  if (w.samples.empty()) throw InvalidInput("fix_length: empty waveform");
  if (target == 0) throw InvalidInput("fix_length: target length must be >= 1");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(target);
  const std::size_t n = w.samples.size();
  for (std::size_t i = 0; i < target; ++i) out.samples[i] = w.samples[i % n];
  return out;
}

// -- RIFF/WAVE, mono 16-bit PCM ---------------------------------------------

inline void write_wav(std::ostream& os, const Waveform& w) {
  w.validate();
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  os.write("RIFF", 4);
  binio::put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  binio::put_u32(os, 16);
  binio::put_u16(os, 1);  // PCM
  binio::put_u16(os, 1);  // mono
  binio::put_u32(os, static_cast<std::uint32_t>(w.sample_rate));
  binio::put_u32(os, static_cast<std::uint32_t>(w.sample_rate) * 2);
  binio::put_u16(os, 2);
  binio::put_u16(os, 16);
  os.write("data", 4);
  binio::put_u32(os, data_bytes);
  for (double s : w.samples) {
    const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    binio::put_u16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  if (!os) throw IoError("failed writing WAVE data");
}

inline Waveform read_wav(std::istream& is) {
  char tag[4];
  auto read_tag = [&](const char* what) {
    if (!is.read(tag, 4)) throw ParseError(std::string("WAVE: truncated while reading ") + what);
    return std::string(tag, 4);
  };
  if (read_tag("RIFF tag") != "RIFF") throw ParseError("WAVE: missing RIFF tag");
  binio::get_u32(is, "RIFF size");
  if (read_tag("WAVE tag") != "WAVE") throw ParseError("WAVE: missing WAVE tag");

  bool have_fmt = false;
  Waveform w;
  while (true) {
    const std::string id = read_tag("chunk id");
    const std::uint32_t size = binio::get_u32(is, "chunk size");
    if (id == "fmt ") {
      if (size < 16) throw ParseError("WAVE: fmt chunk too small");
      const auto format = binio::get_u16(is, "format");
      const auto channels = binio::get_u16(is, "channels");
      const auto rate = binio::get_u32(is, "sample rate");
      binio::get_u32(is, "byte rate");
      binio::get_u16(is, "block align");
      const auto bits = binio::get_u16(is, "bits per sample");
      if (format != 1) throw ParseError("WAVE: only PCM (format 1) is supported, got " + std::to_string(format));
      if (channels != 1) throw ParseError("WAVE: only mono is supported, got " + std::to_string(channels) + " channels");
      if (bits != 16) throw ParseError("WAVE: only 16-bit samples are supported, got " + std::to_string(bits));
      if (rate == 0) throw ParseError("WAVE: zero sample rate");
      w.sample_rate = static_cast<int>(rate);
      is.ignore(size - 16 + (size & 1));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ParseError("WAVE: data chunk before fmt chunk");
      if (size % 2 != 0) throw ParseError("WAVE: odd data size for 16-bit samples");
      w.samples.resize(size / 2);
      for (double& s : w.samples) {
        const auto raw = static_cast<std::int16_t>(binio::get_u16(is, "sample data"));
        s = static_cast<double>(raw) / 32768.0;
      }
      if (w.samples.empty()) throw ParseError("WAVE: empty data chunk");
      return w;
    } else {
      is.ignore(size + (size & 1));
      if (!is) throw ParseError("WAVE: truncated chunk '" + id + "'");
    }
  }
}

inline void save_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_wav(os, w);
}

inline Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  try {
    return read_wav(is);
  } catch (const Error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// -- raw float32 little-endian (test fixtures) ------------------------------

inline void write_raw_f32(std::ostream& os, const Waveform& w) {
  for (double s : w.samples) binio::put_f32(os, static_cast<float>(s));
  if (!os) throw IoError("failed writing raw float32 samples");
}

inline Waveform read_raw_f32(std::istream& is, int sample_rate = kDefaultSampleRate) {
  Waveform w;
  w.sample_rate = sample_rate;
  char buf[4];
  while (is.read(buf, 4)) {
    std::istringstream one(std::string(buf, 4));
    w.samples.push_back(binio::get_f32(one, "sample"));
  }
  if (is.gcount() != 0) throw ParseError("raw float32: trailing partial sample");
  w.validate();
  return w;
}

}  // namespace spoofguard
