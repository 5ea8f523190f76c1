#pragma once

// Feature dump: concatenated per-utterance blocks
//   uint32 rows, uint32 cols (little endian), rows*cols float32 row-major
// with a text manifest of "UTT_ID OFFSET" lines giving each block's byte offset.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "spoofguard/binary_io.hpp"
#include "spoofguard/error.hpp"
#include "spoofguard/lfcc.hpp"

namespace spoofguard {

struct FeatureEntry {
  std::string id;
  FeatureMatrix features;
};

inline void write_feature_dump(const std::filesystem::path& bin_path, const std::filesystem::path& manifest_path,
                               const std::vector<FeatureEntry>& entries) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open '" + bin_path.string() + "' for writing");
  std::ofstream man(manifest_path);
  if (!man) throw IoError("cannot open '" + manifest_path.string() + "' for writing");
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    man << e.id << ' ' << offset << '\n';
    binio::put_u32(bin, static_cast<std::uint32_t>(e.features.rows));
    binio::put_u32(bin, static_cast<std::uint32_t>(e.features.cols));
    for (double v : e.features.data) binio::put_f32(bin, static_cast<float>(v));
    offset += 8 + 4 * static_cast<std::uint64_t>(e.features.data.size());
  }
  if (!bin || !man) throw IoError("failed writing feature dump");
}

/// Reads every block listed in the manifest, in manifest order.
inline std::vector<FeatureEntry> read_feature_dump(const std::filesystem::path& bin_path,
                                                  const std::filesystem::path& manifest_path) {
  std::ifstream man(manifest_path);
  if (!man) throw IoError("cannot open '" + manifest_path.string() + "'");
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open '" + bin_path.string() + "'");
  std::vector<FeatureEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(man, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string id;
    std::uint64_t offset = 0;
    if (!(ls >> id)) continue;
    if (!(ls >> offset)) throw ParseError(lineno, "feature manifest: expected 'UTT_ID OFFSET'");
    bin.seekg(static_cast<std::streamoff>(offset));
    FeatureEntry e;
    e.id = id;
    const std::uint32_t rows = binio::get_u32(bin, "feature rows of '" + id + "'");
    const std::uint32_t cols = binio::get_u32(bin, "feature cols of '" + id + "'");
    e.features = FeatureMatrix(rows, cols);
    for (double& v : e.features.data) v = binio::get_f32(bin, "features of '" + id + "'");
    out.push_back(std::move(e));
  }
  return out;
}

/// Worker count from SPOOFGUARD_THREADS, else hardware concurrency, at least 1.
inline std::size_t worker_count() {
  std::size_t n = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("SPOOFGUARD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) n = static_cast<std::size_t>(v);
  }
  return n == 0 ? 1 : n;
}

/// Applies fn(i) for i in [0, n) across `threads` workers. Results must be
/// written to per-index slots so output order never depends on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::vector<FeatureMatrix> extract_lfcc_batch(const std::vector<Waveform>& waves, const FrontendConfig& cfg,
                                                     std::size_t threads = worker_count()) {
  std::vector<FeatureMatrix> out(waves.size());
  if (waves.empty()) return out;
  const LfccExtractor ex(cfg, waves.front().sample_rate);
  parallel_for(waves.size(), threads, [&](std::size_t i) { out[i] = ex(waves[i]); });
  return out;
}

}  // namespace spoofguard
