#pragma once

// Mini-batch training with optional OHEM, scoring, and dataset assembly.

#include <cmath>
#include <concepts>
#include <numeric>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "spoofguard/adam.hpp"
#include "spoofguard/error.hpp"
#include "spoofguard/feature_dump.hpp"
#include "spoofguard/graph.hpp"
#include "spoofguard/ohem.hpp"
#include "spoofguard/ops.hpp"
#include "spoofguard/parameters.hpp"
#include "spoofguard/protocol.hpp"
#include "spoofguard/scores.hpp"
#include "spoofguard/tiny_model.hpp"
#include "spoofguard/waveform.hpp"

namespace spoofguard {

template <class M>
concept Classifier = requires(M m, const M cm, Graph& g, const BoundParameters& p, NodeId x, const Tensor& t) {
  { m.parameters() } -> std::same_as<ParameterSet&>;
  { cm.input_dim() } -> std::convertible_to<std::size_t>;
  { m.forward(g, p, x, ops::Mode::train) } -> std::same_as<NodeId>;
  m.fit(t);
  { cm.buffers() } -> std::same_as<std::vector<NamedTensor>>;
};

/// Model inputs as rows of [N, D], with label 1 = bona fide, 0 = spoof.
struct Dataset {
  std::vector<std::string> ids;
  Tensor inputs;
  std::vector<int> labels;
  std::vector<std::string> attacks;

  std::size_t size() const noexcept { return ids.size(); }

  void validate() const {
    if (ids.empty()) throw InvalidInput("dataset is empty");
    if (inputs.rank() != 2 || inputs.dim(0) != ids.size() || labels.size() != ids.size() ||
        attacks.size() != ids.size()) {
      throw ShapeError("dataset: inconsistent sizes");
    }
  }

  Tensor rows(std::span<const std::size_t> which) const {
    const std::size_t d = inputs.dim(1);
    Tensor out({which.size(), d});
    for (std::size_t r = 0; r < which.size(); ++r)
      std::copy_n(&inputs.at(which[r], 0), d, &out.at(r, 0));
    return out;
  }
};

namespace trainer_detail {

/// Protocol entries in protocol order, each paired with the position of its
/// id in `ids`. Fails listing ids the protocol names but `ids` lacks.
inline std::vector<std::pair<const TrialRecord*, std::size_t>> align(const std::vector<TrialRecord>& protocol,
                                                                     const std::vector<std::string>& ids) {
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < ids.size(); ++i) where.emplace(ids[i], i);
  std::vector<std::pair<const TrialRecord*, std::size_t>> out;
  std::string missing;
  std::size_t n_missing = 0;
  for (const auto& r : protocol) {
    auto it = where.find(r.utterance_id);
    if (it == where.end()) {
      if (n_missing++ < 10) missing += " " + r.utterance_id;
      continue;
    }
    out.emplace_back(&r, it->second);
  }
  if (n_missing) {
    throw InvalidInput(std::to_string(n_missing) + " protocol utterance(s) missing:" + missing +
                       (n_missing > 10 ? " ..." : ""));
  }
  return out;
}

}  // namespace trainer_detail

/// Summary-statistic inputs for the tiny model.
inline Dataset make_feature_dataset(const std::vector<FeatureEntry>& features, const std::vector<TrialRecord>& protocol) {
  std::vector<std::string> ids;
  for (const auto& f : features) ids.push_back(f.id);
  const auto pairs = trainer_detail::align(protocol, ids);
  Dataset ds;
  std::size_t dim = 0;
  std::vector<double> flat;
  for (const auto& [rec, idx] : pairs) {
    const std::vector<double> s = summary_stats(features[idx].features);
    if (dim == 0) dim = s.size();
    if (s.size() != dim) throw ShapeError("feature dataset: '" + rec->utterance_id + "' has a different coefficient count");
    flat.insert(flat.end(), s.begin(), s.end());
    ds.ids.push_back(rec->utterance_id);
    ds.labels.push_back(label_of(rec->key));
    ds.attacks.push_back(rec->attack_id);
  }
  ds.inputs = Tensor({ds.ids.size(), dim}, std::move(flat));
  return ds;
}

/// Raw waveform inputs, each tiled or cut to `length` samples.
inline Dataset make_waveform_dataset(const std::vector<Waveform>& waves, const std::vector<std::string>& ids,
                                     const std::vector<TrialRecord>& protocol, std::size_t length) {
  if (waves.size() != ids.size()) throw ShapeError("waveform dataset: waveform and id counts differ");
  const auto pairs = trainer_detail::align(protocol, ids);
  Dataset ds;
  std::vector<double> flat;
  flat.reserve(pairs.size() * length);
  for (const auto& [rec, idx] : pairs) {
    const Waveform w = fix_length(waves[idx], length);
    flat.insert(flat.end(), w.samples.begin(), w.samples.end());
    ds.ids.push_back(rec->utterance_id);
    ds.labels.push_back(label_of(rec->key));
    ds.attacks.push_back(rec->attack_id);
  }
  ds.inputs = Tensor({ds.ids.size(), length}, std::move(flat));
  return ds;
}

enum class ModelKind { raw_res2net, tiny };

inline const char* model_kind_name(ModelKind k) { return k == ModelKind::tiny ? "tiny" : "raw-res2net"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "tiny" || s == "tiny_reference") return ModelKind::tiny;
  if (s == "raw-res2net" || s == "raw_res2net") return ModelKind::raw_res2net;
  throw ConfigError("model must be 'tiny' or 'raw-res2net', got '" + s + "'");
}

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  AdamOptions adam;
  ModelKind model = ModelKind::tiny;

  void validate(const OhemConfig& ohem) const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("batch size must be >= 2");
    if (ohem.enabled && batch_size < 4) throw ConfigError("batch size must be >= 4 when OHEM is enabled");
    adam.validate();
    ohem.validate();
  }
};

struct BatchStats {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::size_t n_total = 0;
  std::size_t n_selected = 0;
  double loss_mean = 0.0;       ///< plain mean over the batch
  double loss_selected = 0.0;   ///< the optimized loss
  double loss_discarded = 0.0;  ///< NaN when nothing was discarded
  bool fell_back = false;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;  ///< per-sample loss averaged over every sample seen
  double mean_selected_loss = 0.0;
  std::size_t n_batches = 0;
  std::size_t n_fallback = 0;
};

struct TrainResult {
  std::vector<BatchStats> batches;
  std::vector<EpochStats> epochs;
};

inline void write_stats_csv(std::ostream& os, const TrainResult& r) {
  os << "epoch,batch,loss_selected,loss_discarded,n_selected,n_total,loss_mean,fallback\n";
  for (const auto& b : r.batches) {
    os << b.epoch << ',' << b.batch << ',' << format_double(b.loss_selected) << ','
       << (std::isnan(b.loss_discarded) ? std::string("nan") : format_double(b.loss_discarded)) << ','
       << b.n_selected << ',' << b.n_total << ',' << format_double(b.loss_mean) << ',' << (b.fell_back ? 1 : 0)
       << '\n';
  }
}

/// Fisher-Yates driven directly by the engine so the order does not depend
/// on the standard library's distribution implementations.
inline void seeded_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

/// Partition of a shuffled epoch into batches. A trailing batch of one
/// sample is dropped, since batch norm cannot train on it.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  seeded_shuffle(order, rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch_size) {
    const std::size_t e = std::min(n, b + batch_size);
    if (e - b < 2) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b), order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return out;
}

/// bona fide logit minus spoof logit, per row of [B, 2].
inline std::vector<double> bonafide_scores(const Tensor& logits) {
  std::vector<double> s(logits.dim(0));
  for (std::size_t b = 0; b < s.size(); ++b) s[b] = logits.at(b, 1) - logits.at(b, 0);
  return s;
}

/// One optimizer step on the listed samples.
template <Classifier M>
BatchStats train_step(M& model, const Dataset& data, std::span<const std::size_t> batch, const OhemConfig& ohem,
                      bool mine, AdamState& adam) {
  Graph g;
  const BoundParameters p(g, model.parameters());
  const NodeId x = g.constant(data.rows(batch));
  const NodeId logits = model.forward(g, p, x, ops::Mode::train);
  std::vector<int> labels(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = data.labels[batch[i]];
  const NodeId per_sample = ops::softmax_xent(g, logits, labels);
  const std::span<const double> losses = g.value(per_sample).data();

  BatchStats st;
  st.n_total = batch.size();
  st.loss_mean = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
  NodeId loss;
  if (mine) {
    const std::vector<double> scores = bonafide_scores(g.value(logits));
    Selection sel;
    loss = ohem_loss(g, per_sample, labels, ohem, scores, &sel);
    st.n_selected = sel.indices.size();
    st.loss_discarded = discarded_mean(losses, sel);
    st.fell_back = sel.fell_back;
  } else {
    loss = ops::mean(g, per_sample);
    st.n_selected = batch.size();
    st.loss_discarded = std::nan("");
  }
  st.loss_selected = g.value(loss).item();
  g.backward(loss);
  adam_step(model.parameters(), p.grads(g), adam);
  return st;
}

/// Fits any input normalization on the training set, then runs the epochs.
/// Deterministic in (initial model, data, cfg, ohem).
template <Classifier M>
TrainResult train(M& model, const Dataset& data, const TrainConfig& cfg, const OhemConfig& ohem) {
  cfg.validate(ohem);
  data.validate();
  if (data.inputs.dim(1) != model.input_dim()) {
    throw ShapeError("train: dataset width " + std::to_string(data.inputs.dim(1)) + " != model input " +
                     std::to_string(model.input_dim()));
  }
  model.fit(data.inputs);
  AdamState adam(cfg.adam);
  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool mine = ohem.enabled && epoch >= ohem.warmup_epochs;
    EpochStats es;
    es.epoch = epoch;
    double loss_sum = 0.0, sel_sum = 0.0;
    std::size_t seen = 0;
    const auto batches = epoch_batches(data.size(), cfg.batch_size, rng);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      BatchStats st = train_step(model, data, batches[b], ohem, mine, adam);
      st.epoch = epoch;
      st.batch = b;
      loss_sum += st.loss_mean * static_cast<double>(st.n_total);
      sel_sum += st.loss_selected;
      seen += st.n_total;
      es.n_fallback += st.fell_back ? 1 : 0;
      result.batches.push_back(st);
    }
    es.n_batches = batches.size();
    es.mean_loss = seen ? loss_sum / static_cast<double>(seen) : std::nan("");
    es.mean_selected_loss = es.n_batches ? sel_sum / static_cast<double>(es.n_batches) : std::nan("");
    result.epochs.push_back(es);
  }
  return result;
}

/// Eval-mode logits for every row, in dataset order.
template <Classifier M>
Tensor predict_logits(M& model, const Dataset& data, std::size_t batch_size = 64) {
  data.validate();
  Tensor out({data.size(), 2});
  std::vector<std::size_t> idx;
  for (std::size_t b = 0; b < data.size(); b += batch_size) {
    idx.clear();
    for (std::size_t i = b; i < std::min(data.size(), b + batch_size); ++i) idx.push_back(i);
    Graph g;
    const BoundParameters p(g, model.parameters());
    const NodeId logits = model.forward(g, p, g.constant(data.rows(idx)), ops::Mode::eval);
    const Tensor& lv = g.value(logits);
    if (lv.dim(1) != 2) throw ShapeError("predict: scoring needs a two-class model");
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.at(idx[r], 0) = lv.at(r, 0);
      out.at(idx[r], 1) = lv.at(r, 1);
    }
  }
  return out;
}

/// score = logit(bona fide) - logit(spoof), eval mode.
template <Classifier M>
ScoreSet score_dataset(M& model, const Dataset& data, std::size_t batch_size = 64) {
  const std::vector<double> s = bonafide_scores(predict_logits(model, data, batch_size));
  ScoreSet out;
  for (std::size_t i = 0; i < data.size(); ++i) out.add(data.ids[i], s[i]);
  return out;
}

}  // namespace spoofguard
