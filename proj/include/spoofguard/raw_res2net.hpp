#pragma once

// End-to-end raw-waveform countermeasure:
//
//   fixed sinc conv (stride 1) -> maxpool -> BN -> LeakyReLU
//   -> SE-Res2Net blocks (stage 1) -> SE-Res2Net blocks (stage 2)
//   -> GRU over time (channels as features) -> last hidden
//   -> FC -> LeakyReLU -> output layer (logits)
//
// With the default configuration the activations are
//   [B,20,21192] -> [B,20,2354] -> [B,128,29] -> [B,1024] -> [B,1024] -> [B,2].

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "spoofguard/config.hpp"
#include "spoofguard/error.hpp"
#include "spoofguard/graph.hpp"
#include "spoofguard/gru.hpp"
#include "spoofguard/ops.hpp"
#include "spoofguard/parameters.hpp"
#include "spoofguard/sinc.hpp"

namespace spoofguard {

struct BlockConfig {
  std::size_t channels = 20;
  std::size_t scales = 4;
  std::size_t se_reduction = 4;
  std::size_t pool = 3;

  void validate(std::size_t ch_in) const {
    if (ch_in < 1 || channels < 1) throw ConfigError("res2net block: channel counts must be >= 1");
    if (scales < 1 || channels % scales != 0) {
      throw ConfigError("res2net block: " + std::to_string(channels) + " channels not divisible by scales " +
                        std::to_string(scales));
    }
    if (se_reduction < 1 || channels % se_reduction != 0) {
      throw ConfigError("res2net block: SE reduction " + std::to_string(se_reduction) + " does not divide " +
                        std::to_string(channels) + " channels");
    }
    if (pool < 1) throw ConfigError("res2net block: pool must be >= 1");
  }
};

/// Widths of the hierarchical split; always sums to `channels`.
inline std::vector<std::size_t> res2net_split_widths(const BlockConfig& cfg) {
  return std::vector<std::size_t>(cfg.scales, cfg.channels / cfg.scales);
}

struct BlockNorms {
  ops::BatchNormState bn1, bn2, bn3;
};

namespace model_detail {

inline Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = d(rng);
  return t;
}

inline void add_bn(ParameterSet& ps, const std::string& name, std::size_t ch) {
  ps.add(name + ".gamma", Tensor({ch}, 1.0));
  ps.add(name + ".beta", Tensor({ch}, 0.0));
}

inline void add_conv(ParameterSet& ps, const std::string& name, std::size_t cout, std::size_t cin, std::size_t k,
                     std::mt19937_64& rng) {
  ps.add(name + ".weight", uniform({cout, cin, k}, 1.0 / std::sqrt(static_cast<double>(cin * k)), rng));
}

inline void add_linear(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out,
                       std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  ps.add(name + ".weight", uniform({in, out}, bound, rng));
  ps.add(name + ".bias", uniform({out}, bound, rng));
}

inline NodeId bn(Graph& g, NodeId x, const BoundParameters& p, const std::string& name, ops::BatchNormState& st,
                 ops::Mode mode) {
  return ops::batchnorm1d(g, x, p[name + ".gamma"], p[name + ".beta"], st, mode);
}

}  // namespace model_detail

// -- squeeze-excitation -----------------------------------------------------

inline void init_se_layer(ParameterSet& ps, const std::string& prefix, std::size_t ch, std::size_t reduction,
                          std::mt19937_64& rng) {
  if (reduction < 1 || ch % reduction != 0) {
    throw ConfigError("se_layer: reduction " + std::to_string(reduction) + " does not divide " + std::to_string(ch));
  }
  model_detail::add_linear(ps, prefix + ".fc1", ch, ch / reduction, rng);
  model_detail::add_linear(ps, prefix + ".fc2", ch / reduction, ch, rng);
}

/// x scaled per channel by s = sigmoid(W2 relu(W1 mean_t(x) + b1) + b2).
/// When `scale_out` is given it receives the gate node [B, C].
inline NodeId se_layer(Graph& g, NodeId x, const BoundParameters& p, const std::string& prefix,
                       NodeId* scale_out = nullptr) {
  const std::size_t ch = g.value(x).dim(1);
  if (g.shape(p[prefix + ".fc1.weight"]).at(0) != ch) {
    throw ShapeError("se_layer: parameters sized for " + std::to_string(g.shape(p[prefix + ".fc1.weight"]).at(0)) +
                     " channels, input has " + std::to_string(ch));
  }
  const NodeId squeezed = ops::mean_time(g, x);
  const NodeId hidden = ops::relu(g, ops::affine(g, squeezed, p[prefix + ".fc1.weight"], p[prefix + ".fc1.bias"]));
  const NodeId s = ops::sigmoid(g, ops::affine(g, hidden, p[prefix + ".fc2.weight"], p[prefix + ".fc2.bias"]));
  if (scale_out) *scale_out = s;
  return ops::scale_channels(g, x, s);
}

// -- SE-Res2Net block -------------------------------------------------------

inline void init_res2net_block(ParameterSet& ps, const std::string& prefix, std::size_t ch_in, const BlockConfig& cfg,
                               std::mt19937_64& rng) {
  cfg.validate(ch_in);
  using namespace model_detail;
  const std::size_t ch = cfg.channels;
  const std::size_t width = ch / cfg.scales;
  add_bn(ps, prefix + ".bn1", ch_in);
  add_conv(ps, prefix + ".conv1", ch, ch_in, 1, rng);
  add_bn(ps, prefix + ".bn2", ch);
  for (std::size_t i = 1; i < cfg.scales; ++i) add_conv(ps, prefix + ".res2.conv" + std::to_string(i), width, width, 3, rng);
  add_conv(ps, prefix + ".conv3", ch, ch, 1, rng);
  add_bn(ps, prefix + ".bn3", ch);
  if (ch_in != ch) add_conv(ps, prefix + ".proj", ch, ch_in, 1, rng);
  init_se_layer(ps, prefix + ".se", ch, cfg.se_reduction, rng);
}

inline BlockNorms make_block_norms(std::size_t ch_in, const BlockConfig& cfg) {
  return {ops::BatchNormState(ch_in), ops::BatchNormState(cfg.channels), ops::BatchNormState(cfg.channels)};
}

/// Pre-activation block: BN -> LReLU -> conv1x1 -> BN -> LReLU -> hierarchical
/// 3-tap stage -> conv1x1 -> BN -> LReLU, plus the (projected) input, then
/// maxpool and SE. The hierarchical stage keeps y1 = x1 and computes
/// y_i = conv3_i(x_i + y_{i-1}) for the remaining splits.
inline NodeId res2net_block(Graph& g, NodeId x, const BlockConfig& cfg, const BoundParameters& p,
                            const std::string& prefix, BlockNorms& norms, ops::Mode mode, double slope = 0.3) {
  using namespace ops;
  const Tensor& xv = g.value(x);
  detail::expect_rank(xv, 3, "res2net_block", "input");
  const std::size_t ch_in = xv.dim(1);
  cfg.validate(ch_in);

  NodeId h = model_detail::bn(g, x, p, prefix + ".bn1", norms.bn1, mode);
  h = leaky_relu(g, h, slope);
  h = conv1d(g, h, p[prefix + ".conv1.weight"]);
  h = model_detail::bn(g, h, p, prefix + ".bn2", norms.bn2, mode);
  h = leaky_relu(g, h, slope);

  if (cfg.scales > 1) {
    const std::size_t width = cfg.channels / cfg.scales;
    std::vector<NodeId> ys;
    ys.push_back(slice_channels(g, h, 0, width));
    for (std::size_t i = 1; i < cfg.scales; ++i) {
      const NodeId xi = slice_channels(g, h, i * width, width);
      ys.push_back(conv1d(g, add(g, xi, ys.back()), p[prefix + ".res2.conv" + std::to_string(i) + ".weight"], 1, 1));
    }
    h = concat_channels(g, ys);
  }

  h = conv1d(g, h, p[prefix + ".conv3.weight"]);
  h = model_detail::bn(g, h, p, prefix + ".bn3", norms.bn3, mode);
  h = leaky_relu(g, h, slope);

  const NodeId residual = ch_in == cfg.channels ? x : conv1d(g, x, p[prefix + ".proj.weight"]);
  h = add(g, h, residual);
  h = maxpool1d(g, h, cfg.pool);
  return se_layer(g, h, p, prefix + ".se");
}

// -- model ------------------------------------------------------------------

struct ModelConfig {
  SincConfig sinc;
  std::size_t input_len = 64600;
  std::size_t sinc_pool = 3;
  std::size_t stage1_channels = 20;
  std::size_t stage1_blocks = 2;
  std::size_t stage1_scales = 2;
  std::size_t stage2_channels = 128;
  std::size_t stage2_blocks = 4;
  std::size_t stage2_scales = 4;
  std::size_t se_reduction = 4;
  std::size_t pool = 3;
  std::size_t gru_hidden = 1024;
  std::size_t fc_dim = 1024;
  std::size_t n_classes = 2;
  double leaky_slope = 0.3;

  /// Small configuration for gradient checks and fast tests.
  static ModelConfig tiny();

  BlockConfig block(std::size_t index) const {
    const bool first = index < stage1_blocks;
    return BlockConfig{first ? stage1_channels : stage2_channels, first ? stage1_scales : stage2_scales, se_reduction,
                       pool};
  }
  std::size_t n_blocks() const { return stage1_blocks + stage2_blocks; }

  /// Time length after the sinc conv, after its pooling, and after each block.
  std::vector<std::size_t> time_chain() const {
    std::vector<std::size_t> out;
    if (input_len < sinc.kernel_len) throw ConfigError("model: input_len shorter than sinc kernel");
    std::size_t t = input_len - sinc.kernel_len + 1;
    out.push_back(t);
    t /= sinc_pool;
    out.push_back(t);
    for (std::size_t b = 0; b < n_blocks(); ++b) {
      t /= pool;
      out.push_back(t);
    }
    return out;
  }

  void validate() const {
    sinc.validate();
    if (sinc_pool < 1 || pool < 1) throw ConfigError("model: pooling windows must be >= 1");
    if (stage1_blocks + stage2_blocks < 1) throw ConfigError("model: need at least one block");
    if (gru_hidden < 1 || fc_dim < 1 || n_classes < 2) throw ConfigError("model: gru_hidden, fc_dim >= 1 and n_classes >= 2 required");
    std::size_t ch = sinc.n_filters;
    for (std::size_t b = 0; b < n_blocks(); ++b) {
      block(b).validate(ch);
      ch = block(b).channels;
    }
    for (std::size_t t : time_chain())
      if (t < 1) throw ConfigError("model: input_len " + std::to_string(input_len) + " too short for the pooling chain");
  }

  KeyValueConfig to_kv() const {
    KeyValueConfig kv;
    kv.set("sinc.n_filters", sinc.n_filters);
    kv.set("sinc.kernel_len", sinc.kernel_len);
    kv.set("sinc.sample_rate", static_cast<std::size_t>(sinc.sample_rate));
    kv.set("sinc.min_low_hz", sinc.min_low_hz);
    kv.set("sinc.min_band_hz", sinc.min_band_hz);
    kv.set("sinc.spacing", std::string(sinc.spacing == SincSpacing::mel ? "mel" : "linear"));
    kv.set("input_len", input_len);
    kv.set("sinc_pool", sinc_pool);
    kv.set("stage1.channels", stage1_channels);
    kv.set("stage1.blocks", stage1_blocks);
    kv.set("stage1.scales", stage1_scales);
    kv.set("stage2.channels", stage2_channels);
    kv.set("stage2.blocks", stage2_blocks);
    kv.set("stage2.scales", stage2_scales);
    kv.set("se_reduction", se_reduction);
    kv.set("pool", pool);
    kv.set("gru_hidden", gru_hidden);
    kv.set("fc_dim", fc_dim);
    kv.set("n_classes", n_classes);
    kv.set("leaky_slope", leaky_slope);
    return kv;
  }

  /// Keys absent from kv keep the defaults of `base`.
  static ModelConfig from_kv(const KeyValueConfig& kv, const std::string& key_prefix, ModelConfig base) {
    ModelConfig c = base;
    auto k = [&](const char* name) { return key_prefix + name; };
    c.sinc.n_filters = kv.get(k("sinc.n_filters"), c.sinc.n_filters);
    c.sinc.kernel_len = kv.get(k("sinc.kernel_len"), c.sinc.kernel_len);
    c.sinc.sample_rate = static_cast<int>(kv.get(k("sinc.sample_rate"), static_cast<std::size_t>(c.sinc.sample_rate)));
    c.sinc.min_low_hz = kv.get(k("sinc.min_low_hz"), c.sinc.min_low_hz);
    c.sinc.min_band_hz = kv.get(k("sinc.min_band_hz"), c.sinc.min_band_hz);
    const std::string spacing = kv.get(k("sinc.spacing"), std::string(c.sinc.spacing == SincSpacing::mel ? "mel" : "linear"));
    if (spacing != "mel" && spacing != "linear") throw ConfigError("sinc.spacing must be mel or linear");
    c.sinc.spacing = spacing == "mel" ? SincSpacing::mel : SincSpacing::linear;
    c.input_len = kv.get(k("input_len"), c.input_len);
    c.sinc_pool = kv.get(k("sinc_pool"), c.sinc_pool);
    c.stage1_channels = kv.get(k("stage1.channels"), c.stage1_channels);
    c.stage1_blocks = kv.get(k("stage1.blocks"), c.stage1_blocks);
    c.stage1_scales = kv.get(k("stage1.scales"), c.stage1_scales);
    c.stage2_channels = kv.get(k("stage2.channels"), c.stage2_channels);
    c.stage2_blocks = kv.get(k("stage2.blocks"), c.stage2_blocks);
    c.stage2_scales = kv.get(k("stage2.scales"), c.stage2_scales);
    c.se_reduction = kv.get(k("se_reduction"), c.se_reduction);
    c.pool = kv.get(k("pool"), c.pool);
    c.gru_hidden = kv.get(k("gru_hidden"), c.gru_hidden);
    c.fc_dim = kv.get(k("fc_dim"), c.fc_dim);
    c.n_classes = kv.get(k("n_classes"), c.n_classes);
    c.leaky_slope = kv.get(k("leaky_slope"), c.leaky_slope);
    return c;
  }

  static ModelConfig from_kv(const KeyValueConfig& kv, const std::string& key_prefix = "");

  friend bool operator==(const ModelConfig& a, const ModelConfig& b) {
    return a.to_kv().values() == b.to_kv().values();
  }
};

inline ModelConfig ModelConfig::from_kv(const KeyValueConfig& kv, const std::string& key_prefix) {
  return from_kv(kv, key_prefix, ModelConfig{});
}

inline ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.sinc.n_filters = 4;
  c.sinc.kernel_len = 64;
  c.input_len = 654;
  c.stage1_channels = 4;
  c.stage1_blocks = 2;
  c.stage1_scales = 2;
  c.stage2_channels = 8;
  c.stage2_blocks = 2;
  c.stage2_scales = 4;
  c.se_reduction = 4;
  c.gru_hidden = 8;
  c.fc_dim = 8;
  return c;
}

/// Named activation shapes recorded during a forward pass.
using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

class RawRes2Net {
 public:
  static constexpr const char* kName = "raw-res2net";

  explicit RawRes2Net(ModelConfig cfg, std::uint64_t seed = 0) : cfg_(std::move(cfg)) {
    cfg_.validate();
    sinc_ = spoofguard::sinc_kernels(cfg_.sinc);
    std::mt19937_64 rng(seed);
    using namespace model_detail;
    const std::size_t f = cfg_.sinc.n_filters;
    add_bn(params_, "stem.bn", f);
    norms_.emplace("stem.bn", ops::BatchNormState(f));
    std::size_t ch = f;
    for (std::size_t b = 0; b < cfg_.n_blocks(); ++b) {
      const BlockConfig bc = cfg_.block(b);
      init_res2net_block(params_, block_name(b), ch, bc, rng);
      blocks_.push_back(make_block_norms(ch, bc));
      ch = bc.channels;
    }
    const std::size_t hd = cfg_.gru_hidden;
    const double gb = 1.0 / std::sqrt(static_cast<double>(hd));
    for (const char* gate : {"z", "r", "h"}) {
      params_.add(std::string("gru.w_") + gate, uniform({ch, hd}, gb, rng));
      params_.add(std::string("gru.u_") + gate, uniform({hd, hd}, gb, rng));
      params_.add(std::string("gru.b_") + gate, uniform({hd}, gb, rng));
    }
    add_linear(params_, "fc", hd, cfg_.fc_dim, rng);
    add_linear(params_, "out", cfg_.fc_dim, cfg_.n_classes, rng);
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  std::size_t input_dim() const noexcept { return cfg_.input_len; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }
  /// The frozen sinc filterbank; never part of parameters().
  const Tensor& sinc_kernels() const noexcept { return sinc_; }

  /// Nothing to fit; present so both models train through the same loop.
  void fit(const Tensor& /*inputs*/) {}

  /// input [B, input_len] -> logits [B, n_classes].
  NodeId forward(Graph& g, const BoundParameters& p, NodeId input, ops::Mode mode, ShapeTrace* trace = nullptr) {
    using namespace ops;
    const Tensor& iv = g.value(input);
    detail::expect_rank(iv, 2, "raw_res2net", "input");
    if (iv.dim(1) != cfg_.input_len) {
      throw InvalidInput("raw_res2net: waveform length " + std::to_string(iv.dim(1)) + " != configured input length " +
                         std::to_string(cfg_.input_len));
    }
    const std::size_t batch = iv.dim(0);
    const double slope = cfg_.leaky_slope;
    auto note = [&](const char* name, NodeId n) {
      if (trace) trace->emplace_back(name, g.shape(n));
    };

    NodeId h = reshape(g, input, {batch, 1, cfg_.input_len});
    h = conv1d(g, h, g.constant(sinc_));
    h = maxpool1d(g, h, cfg_.sinc_pool);
    h = batchnorm1d(g, h, p["stem.bn.gamma"], p["stem.bn.beta"], norms_.at("stem.bn"), mode);
    h = leaky_relu(g, h, slope);
    note("sinc", h);
    for (std::size_t b = 0; b < cfg_.n_blocks(); ++b) {
      h = res2net_block(g, h, cfg_.block(b), p, block_name(b), blocks_[b], mode, slope);
      if (b + 1 == cfg_.stage1_blocks) note("stage1", h);
    }
    note("stage2", h);

    const GruNodes gru{p["gru.w_z"], p["gru.w_r"], p["gru.w_h"], p["gru.u_z"], p["gru.u_r"],
                       p["gru.u_h"], p["gru.b_z"], p["gru.b_r"], p["gru.b_h"]};
    const NodeId last = gru_forward(g, transpose_ct(g, h), gru).h_last;
    note("gru", last);
    const NodeId fc = leaky_relu(g, affine(g, last, p["fc.weight"], p["fc.bias"]), slope);
    note("fc", fc);
    const NodeId logits = affine(g, fc, p["out.weight"], p["out.bias"]);
    note("logits", logits);
    return logits;
  }

  /// Batch-norm running statistics as named tensors.
  std::vector<NamedTensor> buffers() const {
    std::vector<NamedTensor> out;
    auto put = [&](const std::string& name, const ops::BatchNormState& s) {
      out.push_back({name + ".running_mean", Tensor({s.running_mean.size()}, s.running_mean)});
      out.push_back({name + ".running_var", Tensor({s.running_var.size()}, s.running_var)});
    };
    put("stem.bn", norms_.at("stem.bn"));
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      put(block_name(b) + ".bn1", blocks_[b].bn1);
      put(block_name(b) + ".bn2", blocks_[b].bn2);
      put(block_name(b) + ".bn3", blocks_[b].bn3);
    }
    return out;
  }

  void load_buffers(const std::vector<NamedTensor>& bufs) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& b : bufs) by_name[b.name] = &b.value;
    auto take = [&](const std::string& name, ops::BatchNormState& s) {
      auto fetch = [&](const std::string& n, std::vector<double>& dst) {
        auto it = by_name.find(n);
        if (it == by_name.end()) throw ParseError("model checkpoint: missing buffer '" + n + "'");
        if (it->second->size() != dst.size()) throw ParseError("model checkpoint: buffer '" + n + "' has wrong size");
        dst.assign(it->second->data().begin(), it->second->data().end());
      };
      fetch(name + ".running_mean", s.running_mean);
      fetch(name + ".running_var", s.running_var);
    };
    take("stem.bn", norms_.at("stem.bn"));
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      take(block_name(b) + ".bn1", blocks_[b].bn1);
      take(block_name(b) + ".bn2", blocks_[b].bn2);
      take(block_name(b) + ".bn3", blocks_[b].bn3);
    }
  }

  KeyValueConfig config_kv() const { return cfg_.to_kv(); }

 private:
  static std::string block_name(std::size_t b) { return "block" + std::to_string(b); }

  static Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
    return model_detail::uniform(std::move(shape), bound, rng);
  }

  ModelConfig cfg_;
  Tensor sinc_;
  ParameterSet params_;
  std::map<std::string, ops::BatchNormState> norms_;
  std::vector<BlockNorms> blocks_;
};

}  // namespace spoofguard
