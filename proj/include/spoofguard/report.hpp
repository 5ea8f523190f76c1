#pragma once

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spoofguard/metrics.hpp"

namespace spoofguard {

struct EvaluationReport {
  std::size_t n_bonafide = 0;
  std::size_t n_spoof = 0;
  double eer = 0.0;  ///< fraction
  double threshold = 0.0;
  double min_tdcf = 0.0;
  std::map<std::string, double> per_attack;  ///< fractions
  DetCurve det;
  std::vector<std::string> warnings;

  friend bool operator==(const EvaluationReport& a, const EvaluationReport& b) {
    auto same_det = [&] {
      if (a.det.size() != b.det.size()) return false;
      for (std::size_t i = 0; i < a.det.size(); ++i)
        if (a.det[i].threshold != b.det[i].threshold || a.det[i].p_miss != b.det[i].p_miss ||
            a.det[i].p_fa != b.det[i].p_fa)
          return false;
      return true;
    };
    return a.n_bonafide == b.n_bonafide && a.n_spoof == b.n_spoof && a.eer == b.eer && a.threshold == b.threshold &&
           a.min_tdcf == b.min_tdcf && a.per_attack == b.per_attack && same_det() && a.warnings == b.warnings;
  }
};

inline EvaluationReport evaluate_report(const ScoreSet& scores, const std::vector<TrialRecord>& keys,
                                        const TdcfParams& params, const std::vector<std::string>& expected_attacks = {}) {
  const ClassScores cs = split_scores(scores, keys);
  EvaluationReport r;
  r.n_bonafide = cs.bonafide.size();
  r.n_spoof = cs.spoof.size();
  r.det = det_curve(cs);
  const EerResult e = eer_from_det(r.det);
  r.eer = e.eer;
  r.threshold = e.threshold;
  r.min_tdcf = min_tdcf_from_det(r.det, params);
  PerAttackEer pa = per_attack_eer(scores, keys, expected_attacks);
  for (const auto& [id, res] : pa.eer) r.per_attack[id] = res.eer;
  r.warnings = std::move(pa.warnings);
  return r;
}

inline nlohmann::ordered_json to_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["eer_percent"] = 100.0 * r.eer;
  j["min_tdcf"] = r.min_tdcf;
  j["threshold"] = r.threshold;
  j["n_bonafide"] = r.n_bonafide;
  j["n_spoof"] = r.n_spoof;
  nlohmann::ordered_json pa = nlohmann::ordered_json::object();
  for (const auto& [id, v] : r.per_attack) pa[id] = 100.0 * v;
  j["per_attack"] = pa;
  nlohmann::ordered_json det = nlohmann::ordered_json::array();
  for (const auto& d : r.det) det.push_back({d.threshold, d.p_miss, d.p_fa});
  j["det"] = det;
  j["warnings"] = r.warnings;
  return j;
}

/// Percentages are converted back to fractions, so values can differ from
/// the original in the last bit.
inline EvaluationReport report_from_json(const nlohmann::ordered_json& j) {
  try {
    EvaluationReport r;
    r.eer = j.at("eer_percent").get<double>() / 100.0;
    r.min_tdcf = j.at("min_tdcf").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.n_bonafide = j.value("n_bonafide", std::size_t{0});
    r.n_spoof = j.value("n_spoof", std::size_t{0});
    for (const auto& [id, v] : j.at("per_attack").items()) r.per_attack[id] = v.get<double>() / 100.0;
    for (const auto& d : j.at("det")) r.det.push_back({d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>()});
    if (j.contains("warnings")) r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report JSON: ") + e.what());
  }
}

namespace report_detail {
inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}
}  // namespace report_detail

/// Aligned table: EER in percent with 2 decimals, t-DCF with 4.
inline std::string to_text(const EvaluationReport& r) {
  using report_detail::fixed;
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %10s %10s\n", "system", "EER(%)", "min t-DCF");
  os << line;
  std::snprintf(line, sizeof(line), "%-12s %10s %10s\n", "pooled", fixed(100.0 * r.eer, 2).c_str(),
                fixed(r.min_tdcf, 4).c_str());
  os << line;
  os << "threshold " << fixed(r.threshold, 6) << "  (" << r.n_bonafide << " bona fide, " << r.n_spoof << " spoof)\n";
  if (!r.per_attack.empty()) {
    os << '\n';
    std::snprintf(line, sizeof(line), "%-12s %10s\n", "attack", "EER(%)");
    os << line;
    for (const auto& [id, v] : r.per_attack) {
      std::snprintf(line, sizeof(line), "%-12s %10s\n", id.c_str(), fixed(100.0 * v, 2).c_str());
      os << line;
    }
  }
  for (const auto& w : r.warnings) os << "warning: " << w << '\n';
  return os.str();
}

/// threshold, p_miss, p_fa per line with a header row.
inline std::string det_tsv(const EvaluationReport& r) {
  std::ostringstream os;
  os << "threshold\tp_miss\tp_fa\n";
  for (const auto& d : r.det) os << format_double(d.threshold) << '\t' << format_double(d.p_miss) << '\t' << format_double(d.p_fa) << '\n';
  return os.str();
}

inline std::string per_attack_tsv(const EvaluationReport& r) {
  std::ostringstream os;
  os << "attack\teer_percent\n";
  for (const auto& [id, v] : r.per_attack) os << id << '\t' << report_detail::fixed(100.0 * v, 4) << '\n';
  return os.str();
}

}  // namespace spoofguard
