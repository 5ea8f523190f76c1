#pragma once

// Countermeasure evaluation: DET sweep, EER, normalized minimum t-DCF,
// per-attack EER and z-norm score fusion. A trial is accepted as bona fide
// when its score is >= the threshold.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spoofguard/error.hpp"
#include "spoofguard/protocol.hpp"
#include "spoofguard/scores.hpp"

namespace spoofguard {

struct DetPoint {
  double threshold;
  double p_miss;  ///< bona fide rejected
  double p_fa;    ///< spoof accepted
};

using DetCurve = std::vector<DetPoint>;

/// Scores split by class.
struct ClassScores {
  std::vector<double> bonafide;
  std::vector<double> spoof;

  void validate() const {
    if (bonafide.empty() || spoof.empty()) {
      throw InvalidInput("evaluation needs at least one bona fide and one spoof trial (got " +
                         std::to_string(bonafide.size()) + " and " + std::to_string(spoof.size()) + ")");
    }
  }
};

/// Every scored id must have a key; keys without a score are skipped.
/// `attack` restricts the spoof side to one attack id.
inline ClassScores split_scores(const ScoreSet& scores, const std::vector<TrialRecord>& keys,
                                const std::optional<std::string>& attack = std::nullopt) {
  std::unordered_map<std::string, const TrialRecord*> by_id;
  for (const auto& k : keys) by_id.emplace(k.utterance_id, &k);
  ClassScores cs;
  std::string missing;
  std::size_t n_missing = 0;
  for (const auto& e : scores.entries()) {
    auto it = by_id.find(e.id);
    if (it == by_id.end()) {
      if (n_missing++ < 10) missing += " " + e.id;
      continue;
    }
    const TrialRecord& r = *it->second;
    if (r.key == Key::bonafide) {
      cs.bonafide.push_back(e.score);
    } else if (!attack || r.attack_id == *attack) {
      cs.spoof.push_back(e.score);
    }
  }
  if (n_missing) {
    throw InvalidInput(std::to_string(n_missing) + " scored utterance(s) have no key:" + missing +
                       (n_missing > 10 ? " ..." : ""));
  }
  return cs;
}

/// Thresholds are the distinct scores in increasing order followed by one
/// value above the maximum, so the curve runs from (0, 1) to (1, 0).
inline DetCurve det_curve(const ClassScores& cs) {
  cs.validate();
  std::vector<double> b = cs.bonafide, s = cs.spoof;
  std::sort(b.begin(), b.end());
  std::sort(s.begin(), s.end());
  std::vector<double> th;
  th.reserve(b.size() + s.size() + 1);
  std::merge(b.begin(), b.end(), s.begin(), s.end(), std::back_inserter(th));
  th.erase(std::unique(th.begin(), th.end()), th.end());
  th.push_back(std::nextafter(th.back(), std::numeric_limits<double>::infinity()));

  const double nb = static_cast<double>(b.size()), ns = static_cast<double>(s.size());
  DetCurve out;
  out.reserve(th.size());
  for (double t : th) {
    const auto below_b = std::lower_bound(b.begin(), b.end(), t) - b.begin();
    const auto below_s = std::lower_bound(s.begin(), s.end(), t) - s.begin();
    out.push_back({t, static_cast<double>(below_b) / nb, static_cast<double>(s.size() - below_s) / ns});
  }
  return out;
}

inline DetCurve det_curve(const ScoreSet& scores, const std::vector<TrialRecord>& keys) {
  return det_curve(split_scores(scores, keys));
}

struct EerResult {
  double eer;
  double threshold;
};

/// Crossing of p_miss and p_fa on the DET curve, linearly interpolated
/// between the last point with p_fa > p_miss and the first with p_fa <= p_miss.
inline EerResult eer_from_det(const DetCurve& det) {
  if (det.size() < 2) throw InvalidInput("eer: DET curve needs at least two points");
  for (std::size_t j = 0; j < det.size(); ++j) {
    const double dj = det[j].p_fa - det[j].p_miss;
    if (dj > 0.0) continue;
    if (dj == 0.0 || j == 0) return {det[j].p_miss, det[j].threshold};
    const DetPoint& a = det[j - 1];
    const DetPoint& c = det[j];
    const double da = a.p_fa - a.p_miss;
    const double t = da / (da - dj);
    return {a.p_miss + t * (c.p_miss - a.p_miss), a.threshold + t * (c.threshold - a.threshold)};
  }
  throw InvalidInput("eer: DET curve never crosses");
}

inline EerResult eer(const ClassScores& cs) { return eer_from_det(det_curve(cs)); }

inline EerResult eer(const ScoreSet& scores, const std::vector<TrialRecord>& keys) {
  return eer(split_scores(scores, keys));
}

/// Cost model and fixed ASV operating point for the tandem detection cost.
struct TdcfParams {
  double cost_miss_asv = 1.0;
  double cost_fa_asv = 10.0;
  double cost_miss_cm = 1.0;
  double cost_fa_cm = 10.0;
  double prior_target = 0.9405;
  double prior_nontarget = 0.0095;
  double prior_spoof = 0.05;
  double asv_p_miss = 0.05;
  double asv_p_fa = 0.01;
  double asv_p_miss_spoof = 0.3;

  void validate() const {
    for (double c : {cost_miss_asv, cost_fa_asv, cost_miss_cm, cost_fa_cm})
      if (!(c >= 0.0)) throw ConfigError("t-DCF: costs must be non-negative");
    for (double p : {prior_target, prior_nontarget, prior_spoof})
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("t-DCF: priors must lie in [0,1]");
    if (std::abs(prior_target + prior_nontarget + prior_spoof - 1.0) > 1e-9) {
      throw ConfigError("t-DCF: priors must sum to 1");
    }
    for (double r : {asv_p_miss, asv_p_fa, asv_p_miss_spoof})
      if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("t-DCF: ASV error rates must lie in [0,1]");
  }

  /// Weight of the CM miss rate.
  double c1() const {
    return prior_target * (cost_miss_cm - cost_miss_asv * asv_p_miss) - prior_nontarget * cost_fa_asv * asv_p_fa;
  }
  /// Weight of the CM false-alarm rate: spoofs the ASV would have let through.
  double c2() const { return prior_spoof * cost_fa_cm * (1.0 - asv_p_miss_spoof); }
};

/// min over the DET sweep of (C1 p_miss + C2 p_fa) / min(C1, C2), at least 0.
inline double min_tdcf_from_det(const DetCurve& det, const TdcfParams& p) {
  p.validate();
  const double c1 = p.c1(), c2 = p.c2();
  if (!(c1 > 0.0) || !(c2 > 0.0)) {
    throw ConfigError("t-DCF: degenerate cost model (C1=" + format_double(c1) + ", C2=" + format_double(c2) + ")");
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& d : det) best = std::min(best, c1 * d.p_miss + c2 * d.p_fa);
  return std::max(0.0, best / std::min(c1, c2));
}

inline double min_tdcf(const ClassScores& cs, const TdcfParams& p) { return min_tdcf_from_det(det_curve(cs), p); }

inline double min_tdcf(const ScoreSet& scores, const std::vector<TrialRecord>& keys, const TdcfParams& p) {
  return min_tdcf(split_scores(scores, keys), p);
}

struct PerAttackEer {
  std::map<std::string, EerResult> eer;
  std::vector<std::string> warnings;
};

/// EER of bona fide against each attack's spoofs alone. Attacks listed in
/// `expected` that have no scored trials are reported as warnings.
inline PerAttackEer per_attack_eer(const ScoreSet& scores, const std::vector<TrialRecord>& keys,
                                   const std::vector<std::string>& expected = {}) {
  std::unordered_map<std::string, const TrialRecord*> by_id;
  for (const auto& k : keys) by_id.emplace(k.utterance_id, &k);
  std::vector<double> bona;
  std::map<std::string, std::vector<double>> spoof;
  for (const auto& e : scores.entries()) {
    auto it = by_id.find(e.id);
    if (it == by_id.end()) throw InvalidInput("scored utterance '" + e.id + "' has no key");
    if (it->second->key == Key::bonafide) {
      bona.push_back(e.score);
    } else {
      spoof[it->second->attack_id].push_back(e.score);
    }
  }
  if (bona.empty()) throw InvalidInput("per-attack EER needs at least one bona fide trial");
  PerAttackEer out;
  for (const auto& a : expected)
    if (!spoof.contains(a)) out.warnings.push_back("attack " + a + " has no scored trials; omitted");
  for (auto& [attack, s] : spoof) out.eer[attack] = eer(ClassScores{bona, std::move(s)});
  return out;
}

/// Each system z-normalized (population standard deviation) and averaged
/// with the given weights, equal by default. Output follows the first
/// system's id order.
inline ScoreSet fuse_scores(const std::vector<ScoreSet>& systems, std::span<const double> weights = {}) {
  if (systems.empty()) throw InvalidInput("fuse: no systems given");
  if (!weights.empty() && weights.size() != systems.size()) {
    throw InvalidInput("fuse: " + std::to_string(weights.size()) + " weights for " + std::to_string(systems.size()) +
                       " systems");
  }
  std::vector<double> w(systems.size(), 1.0);
  if (!weights.empty()) {
    double total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) throw InvalidInput("fuse: weights must be non-negative");
      w[i] = weights[i];
      total += weights[i];
    }
    if (!(total > 0.0)) throw InvalidInput("fuse: weights are all zero");
  }

  const ScoreSet& ref = systems.front();
  for (std::size_t k = 1; k < systems.size(); ++k) {
    std::set<std::string> only_ref, only_k;
    for (const auto& e : ref.entries())
      if (!systems[k].contains(e.id)) only_ref.insert(e.id);
    for (const auto& e : systems[k].entries())
      if (!ref.contains(e.id)) only_k.insert(e.id);
    if (!only_ref.empty() || !only_k.empty()) {
      std::string msg = "fuse: system " + std::to_string(k + 1) + " covers a different id set;";
      std::size_t shown = 0;
      for (const auto& id : only_ref)
        if (shown++ < 10) msg += " -" + id;
      for (const auto& id : only_k)
        if (shown++ < 10) msg += " +" + id;
      if (shown > 10) msg += " ...";
      throw InvalidInput(msg);
    }
  }

  std::vector<double> mean(systems.size()), inv_sd(systems.size());
  for (std::size_t k = 0; k < systems.size(); ++k) {
    const auto& es = systems[k].entries();
    if (es.empty()) throw InvalidInput("fuse: empty score set");
    double m = 0.0;
    for (const auto& e : es) m += e.score;
    m /= static_cast<double>(es.size());
    double v = 0.0;
    for (const auto& e : es) v += (e.score - m) * (e.score - m);
    v /= static_cast<double>(es.size());
    if (!(v > 0.0)) throw InvalidInput("fuse: system " + std::to_string(k + 1) + " has zero score variance");
    mean[k] = m;
    inv_sd[k] = 1.0 / std::sqrt(v);
  }

  double wsum = 0.0;
  for (double x : w) wsum += x;
  ScoreSet out;
  for (const auto& e : ref.entries()) {
    double s = 0.0;
    for (std::size_t k = 0; k < systems.size(); ++k) s += w[k] * (systems[k].at(e.id) - mean[k]) * inv_sd[k];
    out.add(e.id, s / wsum);
  }
  return out;
}

}  // namespace spoofguard
