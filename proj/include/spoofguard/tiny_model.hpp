#pragma once

// Small reference classifier over LFCC summary statistics: standardized
// per-coefficient means and variances -> affine -> LeakyReLU -> affine.
// Trains in seconds, which is what the OHEM experiments need.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "spoofguard/config.hpp"
#include "spoofguard/error.hpp"
#include "spoofguard/graph.hpp"
#include "spoofguard/lfcc.hpp"
#include "spoofguard/ops.hpp"
#include "spoofguard/parameters.hpp"

namespace spoofguard {

/// Per-row mean followed by per-row (population) variance: 2 * rows values.
inline std::vector<double> summary_stats(const FeatureMatrix& f) {
  if (f.rows == 0 || f.cols == 0) throw InvalidInput("summary_stats: empty feature matrix");
  std::vector<double> out(2 * f.rows);
  const double n = static_cast<double>(f.cols);
  for (std::size_t r = 0; r < f.rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < f.cols; ++c) mean += f(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t c = 0; c < f.cols; ++c) var += (f(r, c) - mean) * (f(r, c) - mean);
    out[r] = mean;
    out[f.rows + r] = var / n;
  }
  return out;
}

struct TinyConfig {
  std::size_t input_dim = 120;
  std::size_t hidden = 32;
  std::size_t n_classes = 2;
  double leaky_slope = 0.3;

  void validate() const {
    if (input_dim < 1 || hidden < 1 || n_classes < 2) {
      throw ConfigError("tiny model: need input_dim, hidden >= 1 and n_classes >= 2");
    }
  }

  KeyValueConfig to_kv() const {
    KeyValueConfig kv;
    kv.set("input_dim", input_dim);
    kv.set("hidden", hidden);
    kv.set("n_classes", n_classes);
    kv.set("leaky_slope", leaky_slope);
    return kv;
  }

  static TinyConfig from_kv(const KeyValueConfig& kv, const std::string& key_prefix = "") {
    TinyConfig c;
    c.input_dim = kv.get(key_prefix + "input_dim", c.input_dim);
    c.hidden = kv.get(key_prefix + "hidden", c.hidden);
    c.n_classes = kv.get(key_prefix + "n_classes", c.n_classes);
    c.leaky_slope = kv.get(key_prefix + "leaky_slope", c.leaky_slope);
    return c;
  }

  friend bool operator==(const TinyConfig& a, const TinyConfig& b) { return a.to_kv().values() == b.to_kv().values(); }
};

class TinyReference {
 public:
  static constexpr const char* kName = "tiny";

  explicit TinyReference(TinyConfig cfg = {}, std::uint64_t seed = 0)
      : cfg_(cfg), mean_({cfg.input_dim}, 0.0), scale_({cfg.input_dim}, 1.0) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    params_.add("fc1.weight", glorot_uniform({cfg_.input_dim, cfg_.hidden}, cfg_.input_dim, cfg_.hidden, rng));
    params_.add("fc1.bias", Tensor({cfg_.hidden}, 0.0));
    params_.add("out.weight", glorot_uniform({cfg_.hidden, cfg_.n_classes}, cfg_.hidden, cfg_.n_classes, rng));
    params_.add("out.bias", Tensor({cfg_.n_classes}, 0.0));
  }

  const TinyConfig& config() const noexcept { return cfg_; }
  std::size_t input_dim() const noexcept { return cfg_.input_dim; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  /// Fits the input standardization on rows of [N, input_dim].
  void fit(const Tensor& inputs) {
    if (inputs.rank() != 2 || inputs.dim(1) != cfg_.input_dim || inputs.dim(0) == 0) {
      throw ShapeError("tiny model: fit expects [N, " + std::to_string(cfg_.input_dim) + "], got " +
                       shape_str(inputs.shape()));
    }
    const std::size_t n = inputs.dim(0);
    for (std::size_t j = 0; j < cfg_.input_dim; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += inputs.at(i, j);
      m /= static_cast<double>(n);
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) v += (inputs.at(i, j) - m) * (inputs.at(i, j) - m);
      const double sd = std::sqrt(v / static_cast<double>(n));
      mean_[j] = m;
      scale_[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
  }

  /// input [B, input_dim] -> logits [B, n_classes]. The input is treated as data.
  NodeId forward(Graph& g, const BoundParameters& p, NodeId input, ops::Mode /*mode*/) const {
    const Tensor& iv = g.value(input);
    ops::detail::expect_rank(iv, 2, "tiny_model", "input");
    if (iv.dim(1) != cfg_.input_dim) {
      throw ShapeError("tiny model: input width " + std::to_string(iv.dim(1)) + " != " + std::to_string(cfg_.input_dim));
    }
    Tensor z = iv;
    for (std::size_t i = 0; i < z.dim(0); ++i)
      for (std::size_t j = 0; j < z.dim(1); ++j) z.at(i, j) = (z.at(i, j) - mean_[j]) * scale_[j];
    const NodeId x = g.constant(std::move(z));
    const NodeId h = ops::leaky_relu(g, ops::affine(g, x, p["fc1.weight"], p["fc1.bias"]), cfg_.leaky_slope);
    return ops::affine(g, h, p["out.weight"], p["out.bias"]);
  }

  std::vector<NamedTensor> buffers() const { return {{"norm.mean", mean_}, {"norm.scale", scale_}}; }

  void load_buffers(const std::vector<NamedTensor>& bufs) {
    bool got_mean = false, got_scale = false;
    for (const auto& b : bufs) {
      Tensor* dst = b.name == "norm.mean" ? &mean_ : b.name == "norm.scale" ? &scale_ : nullptr;
      if (!dst) continue;
      if (b.value.shape() != dst->shape()) throw ParseError("model checkpoint: buffer '" + b.name + "' has wrong shape");
      *dst = b.value;
      (b.name == "norm.mean" ? got_mean : got_scale) = true;
    }
    if (!got_mean || !got_scale) throw ParseError("model checkpoint: missing normalizer buffers");
  }

  KeyValueConfig config_kv() const { return cfg_.to_kv(); }

 private:
  TinyConfig cfg_;
  ParameterSet params_;
  Tensor mean_;
  Tensor scale_;
};

}  // namespace spoofguard
