#pragma once

// Shared test helpers: random tensors, gradient-check cases for every graph
// op, brute-force metric and selection oracles, small synthetic datasets.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "spoofguard/spoofguard.hpp"

namespace sgtest {

using namespace spoofguard;

inline Tensor rand_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = d(rng);
  return t;
}

/// Magnitudes in [0.1, 1] with random sign, so no element sits near the
/// kink of relu-like ops.
inline Tensor rand_away_from_zero(Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = (rng() & 1 ? 1.0 : -1.0) * mag(rng);
  return t;
}

/// A shuffled grid of values 0.05 apart plus small noise: no near ties.
inline Tensor rand_distinct(Shape shape, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::vector<double> v(t.size());
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<double>(i) - 1.0 + jitter(rng);
  std::shuffle(v.begin(), v.end(), rng);
  std::copy(v.begin(), v.end(), t.data().begin());
  return t;
}

inline std::size_t rand_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Scalar from any node: a fixed random linear functional of its elements.
inline NodeId sink(Graph& g, NodeId y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ops::weighted_sum(g, y, rand_tensor(g.shape(y), rng));
}

struct GradProblem {
  GraphBuilder build;
  std::vector<Tensor> params;
};

struct GradCase {
  std::string name;
  std::function<GradProblem(std::mt19937_64&)> make;
};

/// One randomized problem generator per differentiable op.
inline std::vector<GradCase> op_grad_cases() {
  using ids_t = std::span<const NodeId>;
  std::vector<GradCase> cases;

  cases.push_back({"conv1d", [](std::mt19937_64& rng) {
                     const std::size_t b = rand_int(rng, 1, 2), cin = rand_int(rng, 1, 3), cout = rand_int(rng, 1, 3);
                     const std::size_t k = rand_int(rng, 1, 4), stride = rand_int(rng, 1, 2), pad = rand_int(rng, 0, 2);
                     const std::size_t t = rand_int(rng, k, k + 6);
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::conv1d(g, p[0], p[1], stride, pad), s); },
                                        {rand_tensor({b, cin, t}, rng), rand_tensor({cout, cin, k}, rng)}};
                   }});
  cases.push_back({"maxpool1d", [](std::mt19937_64& rng) {
                     const std::size_t w = rand_int(rng, 1, 3);
                     const std::size_t b = rand_int(rng, 1, 2), c = rand_int(rng, 1, 3), t = rand_int(rng, w, 3 * w + 2);
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::maxpool1d(g, p[0], w), s); },
                                        {rand_distinct({b, c, t}, rng)}};
                   }});
  cases.push_back({"batchnorm1d_train", [](std::mt19937_64& rng) {
                     const std::size_t b = rand_int(rng, 2, 3), c = rand_int(rng, 1, 3), t = rand_int(rng, 2, 5);
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) {
                                          ops::BatchNormState st(c);
                                          return sink(g, ops::batchnorm1d(g, p[0], p[1], p[2], st, ops::Mode::train), s);
                                        },
                                        {rand_tensor({b, c, t}, rng), rand_tensor({c}, rng, 0.5, 1.5), rand_tensor({c}, rng)}};
                   }});
  cases.push_back({"batchnorm1d_eval", [](std::mt19937_64& rng) {
                     const std::size_t b = rand_int(rng, 1, 3), c = rand_int(rng, 1, 3), t = rand_int(rng, 1, 5);
                     ops::BatchNormState st(c);
                     for (std::size_t i = 0; i < c; ++i) {
                       st.running_mean[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
                       st.running_var[i] = std::uniform_real_distribution<double>(0.2, 2)(rng);
                     }
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) {
                                          ops::BatchNormState local = st;
                                          return sink(g, ops::batchnorm1d(g, p[0], p[1], p[2], local, ops::Mode::eval), s);
                                        },
                                        {rand_tensor({b, c, t}, rng), rand_tensor({c}, rng, 0.5, 1.5), rand_tensor({c}, rng)}};
                   }});
  cases.push_back({"leaky_relu", [](std::mt19937_64& rng) {
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::leaky_relu(g, p[0], 0.3), s); },
                                        {rand_away_from_zero({rand_int(rng, 1, 3), rand_int(rng, 1, 6)}, rng)}};
                   }});
  cases.push_back({"relu", [](std::mt19937_64& rng) {
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::relu(g, p[0]), s); },
                                        {rand_away_from_zero({rand_int(rng, 1, 3), rand_int(rng, 1, 6)}, rng)}};
                   }});
  cases.push_back({"sigmoid", [](std::mt19937_64& rng) {
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::sigmoid(g, p[0]), s); },
                                        {rand_tensor({rand_int(rng, 1, 3), rand_int(rng, 1, 6)}, rng, -4, 4)}};
                   }});
  cases.push_back({"tanh", [](std::mt19937_64& rng) {
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::tanh(g, p[0]), s); },
                                        {rand_tensor({rand_int(rng, 1, 3), rand_int(rng, 1, 6)}, rng, -3, 3)}};
                   }});
  cases.push_back({"affine", [](std::mt19937_64& rng) {
                     const std::size_t b = rand_int(rng, 1, 3), in = rand_int(rng, 1, 5), out = rand_int(rng, 1, 5);
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::affine(g, p[0], p[1], p[2]), s); },
                                        {rand_tensor({b, in}, rng), rand_tensor({in, out}, rng), rand_tensor({out}, rng)}};
                   }});
  cases.push_back({"affine_nobias", [](std::mt19937_64& rng) {
                     const std::size_t b = rand_int(rng, 1, 3), in = rand_int(rng, 1, 5), out = rand_int(rng, 1, 5);
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::affine(g, p[0], p[1]), s); },
                                        {rand_tensor({b, in}, rng), rand_tensor({in, out}, rng)}};
                   }});
  auto binary = [](std::string name, NodeId (*op)(Graph&, NodeId, NodeId)) {
    return GradCase{std::move(name), [op](std::mt19937_64& rng) {
                      const Shape sh{rand_int(rng, 1, 3), rand_int(rng, 1, 4)};
                      const std::uint64_t s = rng();
                      return GradProblem{[=](Graph& g, std::span<const NodeId> p) { return sink(g, op(g, p[0], p[1]), s); },
                                         {rand_tensor(sh, rng), rand_tensor(sh, rng)}};
                    }};
  };
  cases.push_back(binary("add", &ops::add));
  cases.push_back(binary("sub", &ops::sub));
  cases.push_back(binary("mul", &ops::mul));
  cases.push_back({"mean_time", [](std::mt19937_64& rng) {
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::mean_time(g, p[0]), s); },
                                        {rand_tensor({rand_int(rng, 1, 2), rand_int(rng, 1, 3), rand_int(rng, 1, 5)}, rng)}};
                   }});
  cases.push_back({"scale_channels", [](std::mt19937_64& rng) {
                     const std::size_t b = rand_int(rng, 1, 2), c = rand_int(rng, 1, 3), t = rand_int(rng, 1, 5);
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::scale_channels(g, p[0], p[1]), s); },
                                        {rand_tensor({b, c, t}, rng), rand_tensor({b, c}, rng)}};
                   }});
  cases.push_back({"slice_channels", [](std::mt19937_64& rng) {
                     const std::size_t c = rand_int(rng, 1, 5);
                     const std::size_t begin = rand_int(rng, 0, c - 1), count = rand_int(rng, 1, c - begin);
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::slice_channels(g, p[0], begin, count), s); },
                                        {rand_tensor({rand_int(rng, 1, 2), c, rand_int(rng, 1, 4)}, rng)}};
                   }});
  cases.push_back({"concat_channels", [](std::mt19937_64& rng) {
                     const std::size_t b = rand_int(rng, 1, 2), t = rand_int(rng, 1, 4);
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) {
                                          return sink(g, ops::concat_channels(g, {p[0], p[1], p[2]}), s);
                                        },
                                        {rand_tensor({b, rand_int(rng, 1, 3), t}, rng), rand_tensor({b, rand_int(rng, 1, 3), t}, rng),
                                         rand_tensor({b, rand_int(rng, 1, 3), t}, rng)}};
                   }});
  cases.push_back({"transpose_ct", [](std::mt19937_64& rng) {
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::transpose_ct(g, p[0]), s); },
                                        {rand_tensor({rand_int(rng, 1, 2), rand_int(rng, 1, 3), rand_int(rng, 1, 4)}, rng)}};
                   }});
  cases.push_back({"time_step", [](std::mt19937_64& rng) {
                     const std::size_t t = rand_int(rng, 1, 4), step = rand_int(rng, 0, t - 1);
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::time_step(g, p[0], step), s); },
                                        {rand_tensor({rand_int(rng, 1, 2), t, rand_int(rng, 1, 3)}, rng)}};
                   }});
  cases.push_back({"stack_time", [](std::mt19937_64& rng) {
                     const Shape sh{rand_int(rng, 1, 2), rand_int(rng, 1, 3)};
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::stack_time(g, {p[0], p[1], p[0]}), s); },
                                        {rand_tensor(sh, rng), rand_tensor(sh, rng)}};
                   }});
  cases.push_back({"softmax_xent", [](std::mt19937_64& rng) {
                     const std::size_t b = rand_int(rng, 1, 4), c = rand_int(rng, 2, 4);
                     std::vector<int> labels(b);
                     for (int& y : labels) y = static_cast<int>(rand_int(rng, 0, c - 1));
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::softmax_xent(g, p[0], labels), s); },
                                        {rand_tensor({b, c}, rng, -3, 3)}};
                   }});
  cases.push_back({"select_mean", [](std::mt19937_64& rng) {
                     const std::size_t n = rand_int(rng, 1, 8);
                     std::vector<std::size_t> idx;
                     for (std::size_t i = 0; i < n; ++i)
                       if (rng() & 1) idx.push_back(i);
                     if (idx.empty()) idx.push_back(0);
                     return GradProblem{[=](Graph& g, ids_t p) { return ops::select_mean(g, p[0], idx); },
                                        {rand_tensor({n}, rng)}};
                   }});
  cases.push_back({"mean", [](std::mt19937_64& rng) {
                     return GradProblem{[](Graph& g, ids_t p) { return ops::mean(g, p[0]); },
                                        {rand_tensor({rand_int(rng, 1, 3), rand_int(rng, 1, 4)}, rng)}};
                   }});
  cases.push_back({"weighted_sum", [](std::mt19937_64& rng) {
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, p[0], s); },
                                        {rand_tensor({rand_int(rng, 1, 3), rand_int(rng, 1, 4)}, rng)}};
                   }});
  cases.push_back({"reshape", [](std::mt19937_64& rng) {
                     const std::size_t a = rand_int(rng, 1, 3), b = rand_int(rng, 1, 3);
                     const std::uint64_t s = rng();
                     return GradProblem{[=](Graph& g, ids_t p) { return sink(g, ops::reshape(g, p[0], {b, a}), s); },
                                        {rand_tensor({a * b}, rng)}};
                   }});
  cases.push_back({"gru", [](std::mt19937_64& rng) {
                     const std::size_t b = rand_int(rng, 1, 2), t = rand_int(rng, 1, 3), in = rand_int(rng, 1, 3),
                                       h = rand_int(rng, 1, 3);
                     const std::uint64_t s = rng();
                     std::vector<Tensor> params{rand_tensor({b, t, in}, rng)};
                     for (int gate = 0; gate < 3; ++gate) {
                       params.push_back(rand_tensor({in, h}, rng));
                       params.push_back(rand_tensor({h, h}, rng));
                       params.push_back(rand_tensor({h}, rng));
                     }
                     return GradProblem{[=](Graph& g, ids_t p) {
                                          const GruNodes n{p[1], p[4], p[7], p[2], p[5], p[8], p[3], p[6], p[9]};
                                          const GruOutput o = gru_forward(g, p[0], n);
                                          return ops::add(g, sink(g, o.outputs, s), sink(g, o.h_last, s + 1));
                                        },
                                        std::move(params)};
                   }});
  return cases;
}

/// Mean cross-entropy of a whole model on a fixed batch, as a function of
/// every trainable parameter. Batch norm runs in train mode.
template <class M>
GradProblem model_grad_problem(M& model, Tensor x, std::vector<int> labels) {
  std::vector<Tensor> params;
  for (const auto& e : model.parameters().entries()) params.push_back(e.value);
  return GradProblem{[&model, x = std::move(x), labels = std::move(labels)](Graph& g, std::span<const NodeId> ids) {
                       const BoundParameters bp(model.parameters(), std::vector<NodeId>(ids.begin(), ids.end()));
                       const NodeId logits = model.forward(g, bp, g.constant(x), ops::Mode::train);
                       return ops::mean(g, ops::softmax_xent(g, logits, labels));
                     },
                     std::move(params)};
}

// -- brute-force metric oracles ---------------------------------------------

struct OracleDet {
  std::vector<double> threshold, p_miss, p_fa;
};

/// Counts every threshold directly, O(n^2).
inline OracleDet oracle_det(const std::vector<double>& bona, const std::vector<double>& spoof) {
  std::vector<double> cand = bona;
  cand.insert(cand.end(), spoof.begin(), spoof.end());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  cand.push_back(std::nextafter(cand.back(), std::numeric_limits<double>::infinity()));
  OracleDet d;
  for (double t : cand) {
    std::size_t miss = 0, fa = 0;
    for (double b : bona) miss += b < t;
    for (double s : spoof) fa += s >= t;
    d.threshold.push_back(t);
    d.p_miss.push_back(static_cast<double>(miss) / static_cast<double>(bona.size()));
    d.p_fa.push_back(static_cast<double>(fa) / static_cast<double>(spoof.size()));
  }
  return d;
}

/// Linear interpolation of the first sign change of p_fa - p_miss.
inline double oracle_eer(const std::vector<double>& bona, const std::vector<double>& spoof) {
  const OracleDet d = oracle_det(bona, spoof);
  for (std::size_t j = 0; j < d.threshold.size(); ++j) {
    const double dj = d.p_fa[j] - d.p_miss[j];
    if (dj > 0) continue;
    if (j == 0 || dj == 0) return d.p_miss[j];
    const double dp = d.p_fa[j - 1] - d.p_miss[j - 1];
    const double w = dp / (dp - dj);
    return d.p_miss[j - 1] + w * (d.p_miss[j] - d.p_miss[j - 1]);
  }
  return std::nan("");
}

inline double oracle_min_tdcf(const std::vector<double>& bona, const std::vector<double>& spoof, const TdcfParams& p) {
  const double c1 = p.prior_target * (p.cost_miss_cm - p.cost_miss_asv * p.asv_p_miss) -
                    p.prior_nontarget * p.cost_fa_asv * p.asv_p_fa;
  const double c2 = p.prior_spoof * p.cost_fa_cm * (1.0 - p.asv_p_miss_spoof);
  const OracleDet d = oracle_det(bona, spoof);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < d.threshold.size(); ++j) best = std::min(best, (c1 * d.p_miss[j] + c2 * d.p_fa[j]) / std::min(c1, c2));
  return std::max(0.0, best);
}

/// Random class scores with frequent ties (values on a coarse grid half the time).
inline ClassScores random_class_scores(std::mt19937_64& rng, std::size_t max_total = 50) {
  const std::size_t nb = rand_int(rng, 1, max_total - 1);
  const std::size_t ns = rand_int(rng, 1, max_total - nb);
  const bool coarse = rng() & 1;
  const double shift = std::uniform_real_distribution<double>(-1.0, 2.0)(rng);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto draw = [&](double mu) {
    const double v = mu + n01(rng);
    return coarse ? std::round(v * 4.0) / 4.0 : v;
  };
  ClassScores cs;
  for (std::size_t i = 0; i < nb; ++i) cs.bonafide.push_back(draw(shift));
  for (std::size_t i = 0; i < ns; ++i) cs.spoof.push_back(draw(0.0));
  return cs;
}

// -- OHEM oracle --------------------------------------------------------------

/// Indices kept by hard-example mining, computed with a full sort on
/// (key descending, index ascending) pairs.
inline std::vector<std::size_t> oracle_select(const std::vector<double>& losses, const std::vector<int>& labels,
                                              double fraction, std::size_t min_selected, bool negatives_only) {
  std::vector<std::pair<double, std::size_t>> pool;
  for (std::size_t i = 0; i < losses.size(); ++i)
    if (!negatives_only || labels[i] == 0) pool.push_back({losses[i], i});
  bool keep_bona = negatives_only;
  if (pool.empty()) {
    keep_bona = false;
    for (std::size_t i = 0; i < losses.size(); ++i) pool.push_back({losses[i], i});
  }
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const double exact = fraction * static_cast<double>(pool.size());
  std::size_t k = static_cast<std::size_t>(std::llround(exact));
  if (static_cast<double>(k) < exact - 1e-9) ++k;  // ceiling that forgives rounding noise
  k = std::min(pool.size(), std::max(min_selected, k));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(pool[i].second);
  if (keep_bona)
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] != 0) out.push_back(i);
  std::sort(out.begin(), out.end());
  return out;
}

// -- datasets -------------------------------------------------------------------

/// Summary-statistic dataset for the tiny classifier, built through the
/// regular synth -> LFCC path.
inline Dataset tiny_dataset(const SynthConfig& cfg) {
  const SyntheticDataset ds = generate_synthetic_dataset(cfg);
  const auto feats = extract_lfcc_batch(ds.waveforms, FrontendConfig{});
  std::vector<FeatureEntry> entries;
  for (std::size_t i = 0; i < feats.size(); ++i) entries.push_back({ds.trials[i].utterance_id, feats[i]});
  return make_feature_dataset(entries, ds.trials);
}

inline std::vector<TrialRecord> dataset_keys(const Dataset& d) {
  std::vector<TrialRecord> keys;
  for (std::size_t i = 0; i < d.size(); ++i) {
    TrialRecord r;
    r.speaker_id = "SPK";
    r.utterance_id = d.ids[i];
    r.key = d.labels[i] == 1 ? Key::bonafide : Key::spoof;
    r.attack_id = d.attacks[i];
    keys.push_back(r);
  }
  return keys;
}

// -- fusion case -------------------------------------------------------------

/// Three systems observing one shared per-trial signal through independent
/// Gaussian noise. 100 bona fide (signal mean 1) and 400 spoof (mean 0).
struct FusionCase {
  std::vector<TrialRecord> keys;
  std::vector<ScoreSet> systems;
};

inline FusionCase fusion_case(std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  FusionCase fc;
  std::vector<double> signal;
  for (std::size_t i = 0; i < 500; ++i) {
    TrialRecord r;
    r.speaker_id = "SPK";
    r.utterance_id = "T" + std::to_string(i);
    r.key = i < 100 ? Key::bonafide : Key::spoof;
    r.attack_id = i < 100 ? "-" : "A01";
    fc.keys.push_back(r);
    signal.push_back((i < 100 ? 1.0 : 0.0) + 0.5 * n01(rng));
  }
  for (int k = 0; k < 3; ++k) {
    ScoreSet s;
    for (std::size_t i = 0; i < signal.size(); ++i) s.add(fc.keys[i].utterance_id, signal[i] + n01(rng));
    fc.systems.push_back(std::move(s));
  }
  return fc;
}

inline std::pair<std::vector<double>, std::vector<double>> split_for_oracle(const ScoreSet& s,
                                                                           const std::vector<TrialRecord>& keys) {
  std::vector<double> b, sp;
  for (const auto& k : keys) (k.key == Key::bonafide ? b : sp).push_back(s.at(k.utterance_id));
  return {b, sp};
}

}  // namespace sgtest
