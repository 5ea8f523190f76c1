#pragma once

// key=value text configuration. Blank lines and lines starting with '#' are
// ignored; whitespace around keys and values is trimmed.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "spoofguard/error.hpp"
#include "spoofguard/scores.hpp"

namespace spoofguard {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& is) {
    KeyValueConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ParseError(lineno, "expected key=value, got '" + t + "'");
      std::string key = trim(t.substr(0, eq));
      if (key.empty()) throw ParseError(lineno, "empty key");
      c.values_[key] = trim(t.substr(eq + 1));
    }
    return c;
  }

  static KeyValueConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config '" + path.string() + "'");
    return parse(is);
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void set(const std::string& key, double value) { values_[key] = format_double(value); }
  void set(const std::string& key, std::size_t value) { values_[key] = std::to_string(value); }

  bool has(const std::string& key) const { return values_.contains(key); }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v = 0.0;
    const auto& s = it->second;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ConfigError("config key '" + key + "': '" + s + "' is not a number");
    return v;
  }

  std::size_t get(const std::string& key, std::size_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::size_t v = 0;
    const auto& s = it->second;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      throw ConfigError("config key '" + key + "': '" + s + "' is not a non-negative integer");
    }
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto& s = it->second;
    if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "off" || s == "no") return false;
    throw ConfigError("config key '" + key + "': '" + s + "' is not a boolean");
  }

  /// Fails on any key outside `known`.
  void require_known(const std::set<std::string>& known) const {
    for (const auto& [k, v] : values_)
      if (!known.contains(k)) throw ConfigError("unknown config key '" + k + "'");
  }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  void write(std::ostream& os) const {
    for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace spoofguard
