#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "spoofguard/error.hpp"

namespace spoofguard {

enum class Key { bonafide, spoof };

inline const char* key_name(Key k) { return k == Key::bonafide ? "bonafide" : "spoof"; }

/// One line of an LA-style countermeasure protocol:
///   SPEAKER UTT_ID <unused> ATTACK KEY
struct TrialRecord {
  std::string speaker_id;
  std::string utterance_id;
  std::string attack_id = "-";
  Key key = Key::bonafide;
  std::string system_field = "-";  ///< third column, carried through untouched

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

/// Class index used by the classifiers: bona fide is the positive class.
inline int label_of(Key k) { return k == Key::bonafide ? 1 : 0; }

inline std::vector<TrialRecord> parse_protocol(std::istream& is) {
  std::vector<TrialRecord> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::vector<std::string> f;
    for (std::string tok; ls >> tok;) f.push_back(std::move(tok));
    if (f.empty()) continue;
    if (f.size() != 5) {
      throw ParseError(lineno, "expected 5 fields (SPEAKER UTT_ID - ATTACK KEY), got " + std::to_string(f.size()));
    }
    TrialRecord r;
    r.speaker_id = f[0];
    r.utterance_id = f[1];
    r.system_field = f[2];
    r.attack_id = f[3];
    if (f[4] == "bonafide") {
      r.key = Key::bonafide;
    } else if (f[4] == "spoof") {
      r.key = Key::spoof;
    } else {
      throw ParseError(lineno, "unknown key '" + f[4] + "' (expected bonafide or spoof)");
    }
    if ((r.key == Key::bonafide) != (r.attack_id == "-")) {
      throw ParseError(lineno, "key '" + f[4] + "' inconsistent with attack '" + r.attack_id + "'");
    }
    if (!seen.insert(r.utterance_id).second) {
      throw ParseError(lineno, "duplicate utterance id '" + r.utterance_id + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<TrialRecord> parse_protocol(const std::string& text) {
  std::istringstream is(text);
  return parse_protocol(is);
}

inline void write_protocol(std::ostream& os, const std::vector<TrialRecord>& records) {
  for (const auto& r : records) {
    os << r.speaker_id << ' ' << r.utterance_id << ' ' << r.system_field << ' ' << r.attack_id << ' '
       << key_name(r.key) << '\n';
  }
}

}  // namespace spoofguard
