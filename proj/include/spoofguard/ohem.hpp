#pragma once

// Online hard example mining. Per batch: rank the pool by a hardness key,
// keep the top k = max(min_selected, ceil(fraction * |pool|)) and average the
// loss over those only. With scope negatives_only the pool is the spoof
// samples and every bona fide sample is kept as well.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "spoofguard/error.hpp"
#include "spoofguard/graph.hpp"
#include "spoofguard/ops.hpp"
#include "spoofguard/scores.hpp"

namespace spoofguard {

enum class OhemScope { all_samples, negatives_only };
enum class RankKey { per_sample_loss, bonafide_score };

inline const char* scope_name(OhemScope s) { return s == OhemScope::all_samples ? "all" : "negatives"; }
inline const char* rank_key_name(RankKey k) { return k == RankKey::per_sample_loss ? "loss" : "score"; }

inline OhemScope parse_scope(const std::string& s) {
  if (s == "all" || s == "all_samples") return OhemScope::all_samples;
  if (s == "negatives" || s == "negatives_only") return OhemScope::negatives_only;
  throw ConfigError("ohem scope must be 'all' or 'negatives', got '" + s + "'");
}

inline RankKey parse_rank_key(const std::string& s) {
  if (s == "loss" || s == "per_sample_loss") return RankKey::per_sample_loss;
  if (s == "score" || s == "bonafide_score") return RankKey::bonafide_score;
  throw ConfigError("ohem rank key must be 'loss' or 'score', got '" + s + "'");
}

struct OhemConfig {
  bool enabled = true;
  double fraction = 0.25;
  std::size_t min_selected = 1;
  OhemScope scope = OhemScope::negatives_only;
  RankKey rank_key = RankKey::per_sample_loss;
  std::size_t warmup_epochs = 0;  ///< epochs trained on the plain mean first

  void validate() const {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
      throw ConfigError("ohem fraction must lie in (0, 1], got " + format_double(fraction));
    }
    if (min_selected < 1) throw ConfigError("ohem min_selected must be >= 1");
  }
};

/// Number of samples kept from a pool of `pool` candidates, never more than
/// the pool. The ceiling tolerates representation error in fraction * pool so
/// that e.g. 0.1 * 30 keeps 3.
inline std::size_t ohem_count(std::size_t pool, const OhemConfig& cfg) {
  const double raw = std::ceil(cfg.fraction * static_cast<double>(pool) - 1e-9);
  const std::size_t k = std::max(cfg.min_selected, static_cast<std::size_t>(std::max(0.0, raw)));
  return std::min(k, pool);
}

struct Selection {
  std::vector<std::size_t> indices;  ///< ascending
  std::size_t pool_size = 0;
  std::size_t mined = 0;             ///< how many came from ranking the pool
  bool fell_back = false;            ///< negatives_only batch without spoofs
};

/// Hard-example selection. `bonafide_scores` is only read for
/// RankKey::bonafide_score. Ties go to the smaller index.
inline Selection select_hard(std::span<const double> losses, std::span<const int> labels, const OhemConfig& cfg,
                             std::span<const double> bonafide_scores = {}) {
  cfg.validate();
  const std::size_t n = losses.size();
  if (n == 0) throw InvalidInput("select_hard: empty batch");
  if (labels.size() != n) throw ShapeError("select_hard: losses and labels differ in length");
  for (double l : losses)
    if (!std::isfinite(l)) throw InvalidInput("select_hard: non-finite loss");
  const bool by_score = cfg.rank_key == RankKey::bonafide_score;
  if (by_score && bonafide_scores.size() != n) {
    throw InvalidInput("select_hard: rank key 'score' needs one bona fide score per sample");
  }

  Selection sel;
  std::vector<std::size_t> pool;
  if (cfg.scope == OhemScope::negatives_only) {
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == 0) pool.push_back(i);
    if (pool.empty()) sel.fell_back = true;
  }
  const bool pool_all = cfg.scope == OhemScope::all_samples || sel.fell_back;
  if (pool_all) {
    pool.resize(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  }
  sel.pool_size = pool.size();

  auto key = [&](std::size_t i) { return by_score ? bonafide_scores[i] : losses[i]; };
  std::stable_sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  sel.mined = ohem_count(pool.size(), cfg);
  sel.indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(sel.mined));
  if (!pool_all) {
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] != 0) sel.indices.push_back(i);
  }
  std::sort(sel.indices.begin(), sel.indices.end());
  return sel;
}

/// Mean of losses over the selection, summed in ascending index order.
inline double selection_mean(std::span<const double> losses, const Selection& sel) {
  double s = 0.0;
  for (std::size_t i : sel.indices) s += losses[i];
  return s / static_cast<double>(sel.indices.size());
}

/// Mean over samples not in the selection; NaN when nothing was discarded.
inline double discarded_mean(std::span<const double> losses, const Selection& sel) {
  std::vector<bool> kept(losses.size(), false);
  for (std::size_t i : sel.indices) kept[i] = true;
  double s = 0.0;
  std::size_t c = 0;
  for (std::size_t i = 0; i < losses.size(); ++i)
    if (!kept[i]) {
      s += losses[i];
      ++c;
    }
  return c ? s / static_cast<double>(c) : std::nan("");
}

inline double ohem_loss(std::span<const double> losses, std::span<const int> labels, const OhemConfig& cfg,
                        std::span<const double> bonafide_scores = {}) {
  return selection_mean(losses, select_hard(losses, labels, cfg, bonafide_scores));
}

/// Graph form over a [B] per-sample loss node. Unselected samples receive
/// exactly zero gradient.
inline NodeId ohem_loss(Graph& g, NodeId per_sample, std::span<const int> labels, const OhemConfig& cfg,
                        std::span<const double> bonafide_scores = {}, Selection* selection = nullptr) {
  const Tensor& lv = g.value(per_sample);
  if (lv.rank() != 1) throw ShapeError("ohem_loss: per-sample losses must be a vector, got " + shape_str(lv.shape()));
  Selection sel = select_hard(lv.data(), labels, cfg, bonafide_scores);
  const NodeId out = ops::select_mean(g, per_sample, sel.indices);
  if (selection) *selection = std::move(sel);
  return out;
}

}  // namespace spoofguard
