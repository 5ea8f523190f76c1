#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "spoofguard/error.hpp"

namespace spoofguard {

/// Countermeasure scores keyed by utterance id, higher meaning more bona
/// fide. Iteration follows insertion order.
class ScoreSet {
 public:
  struct Entry {
    std::string id;
    double score;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  void add(std::string id, double score) {
    if (!std::isfinite(score)) throw InvalidInput("score for '" + id + "' is not finite");
    if (index_.contains(id)) throw InvalidInput("duplicate utterance id '" + id + "' in score set");
    index_.emplace(id, entries_.size());
    entries_.push_back({std::move(id), score});
  }

  bool contains(const std::string& id) const { return index_.contains(id); }
  double at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw InvalidInput("no score for '" + id + "'");
    return entries_[it->second].score;
  }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  friend bool operator==(const ScoreSet& a, const ScoreSet& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_scores(std::ostream& os, const ScoreSet& s) {
  for (const auto& e : s.entries()) os << e.id << ' ' << format_double(e.score) << '\n';
  if (!os) throw IoError("failed writing scores");
}

inline ScoreSet read_scores(std::istream& is) {
  ScoreSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::vector<std::string> f;
    for (std::string tok; ls >> tok;) f.push_back(std::move(tok));
    if (f.empty()) continue;
    if (f.size() != 2) throw ParseError(lineno, "expected 'UTT_ID SCORE', got " + std::to_string(f.size()) + " fields");
    double v = 0.0;
    const char* first = f[1].data();
    const char* last = first + f[1].size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
      throw ParseError(lineno, "score '" + f[1] + "' is not a finite number");
    }
    if (out.contains(f[0])) throw ParseError(lineno, "duplicate utterance id '" + f[0] + "'");
    out.add(std::move(f[0]), v);
  }
  return out;
}

inline void save_scores(const std::filesystem::path& path, const ScoreSet& s) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_scores(os, s);
}

inline ScoreSet load_scores(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return read_scores(is);
}

}  // namespace spoofguard
