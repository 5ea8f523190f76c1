#pragma once

// Differentiable operators over Graph nodes. Layout conventions:
//   sequences  [batch, channels, time]
//   matrices   [batch, features]
// Every op records its own exact backward.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spoofguard/error.hpp"
#include "spoofguard/graph.hpp"
#include "spoofguard/tensor.hpp"

namespace spoofguard::ops {

namespace detail {

inline void expect_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + shape_str(t.shape()));
  }
}

inline void expect_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <class Fwd, class Deriv>
NodeId unary(Graph& g, NodeId x, const char* kind, Fwd fwd, Deriv deriv) {
  const Tensor& xv = g.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return g.record(kind, {x}, std::move(out), [x, deriv](Graph& gr, const Tensor& go) {
    Tensor* dx = gr.grad_sink(x);
    if (!dx) return;
    const Tensor& xv = gr.value(x);
    for (std::size_t i = 0; i < xv.size(); ++i) (*dx)[i] += go[i] * deriv(xv[i]);
  });
}

inline double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace detail

inline std::size_t conv1d_out_len(std::size_t time, std::size_t kernel, std::size_t stride,
                                  std::size_t padding) {
  return (time + 2 * padding - kernel) / stride + 1;
}

/// Cross-correlation. x [B, Cin, T], kernels [Cout, Cin, K] -> [B, Cout, Tout]
/// with Tout = floor((T + 2*padding - K) / stride) + 1. Zero padding.
inline NodeId conv1d(Graph& g, NodeId x, NodeId kernels, std::size_t stride = 1, std::size_t padding = 0) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(kernels);
  detail::expect_rank(xv, 3, "conv1d", "input");
  detail::expect_rank(wv, 3, "conv1d", "kernels");
  const std::size_t batch = xv.dim(0), cin = xv.dim(1), time = xv.dim(2);
  const std::size_t cout = wv.dim(0), k = wv.dim(2);
  if (wv.dim(1) != cin) {
    throw ShapeError("conv1d: kernel in_channels " + std::to_string(wv.dim(1)) +
                     " != input channels " + std::to_string(cin));
  }
  if (stride == 0) throw ShapeError("conv1d: stride must be >= 1");
  if (k == 0 || time + 2 * padding < k) {
    throw ShapeError("conv1d: kernel length " + std::to_string(k) + " exceeds padded time " +
                     std::to_string(time + 2 * padding));
  }
  const std::size_t tout = conv1d_out_len(time, k, stride, padding);

  // Output positions whose tap j lands inside [0, time).
  auto valid_range = [=](std::size_t j) {
    // source = to*stride + j - padding
    std::size_t lo = 0;
    if (j < padding) lo = (padding - j + stride - 1) / stride;
    std::size_t hi = 0;  // exclusive
    if (time + padding > j) hi = std::min(tout, (time + padding - j - 1) / stride + 1);
    return std::pair{lo, std::max(lo, hi)};
  };

  Tensor out({batch, cout, tout}, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* o = &out.at(b, co, 0);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* xs = &xv.at(b, ci, 0);
        const double* w = &wv.at(co, ci, 0);
        for (std::size_t j = 0; j < k; ++j) {
          const double wj = w[j];
          const auto [lo, hi] = valid_range(j);
          if (stride == 1) {
            for (std::size_t t = lo; t < hi; ++t) o[t] += wj * xs[t + j - padding];
          } else {
            for (std::size_t t = lo; t < hi; ++t) o[t] += wj * xs[t * stride + j - padding];
          }
        }
      }
    }
  }

  return g.record("conv1d", {x, kernels}, std::move(out),
                  [=](Graph& gr, const Tensor& go) {
                    const Tensor& xv = gr.value(x);
                    const Tensor& wv = gr.value(kernels);
                    Tensor* dx = gr.grad_sink(x);
                    Tensor* dw = gr.grad_sink(kernels);
                    for (std::size_t b = 0; b < batch; ++b) {
                      for (std::size_t co = 0; co < cout; ++co) {
                        const double* o = &go.at(b, co, 0);
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                          for (std::size_t j = 0; j < k; ++j) {
                            const auto [lo, hi] = valid_range(j);
                            if (dw) {
                              const double* xs = &xv.at(b, ci, 0);
                              double acc = 0.0;
                              for (std::size_t t = lo; t < hi; ++t) acc += o[t] * xs[t * stride + j - padding];
                              dw->at(co, ci, j) += acc;
                            }
                            if (dx) {
                              double* d = &dx->at(b, ci, 0);
                              const double wj = wv.at(co, ci, j);
                              for (std::size_t t = lo; t < hi; ++t) d[t * stride + j - padding] += wj * o[t];
                            }
                          }
                        }
                      }
                    }
                  });
}

/// Non-overlapping max pooling along time; the trailing remainder is dropped.
/// Gradient goes to the first maximal element of each window.
inline NodeId maxpool1d(Graph& g, NodeId x, std::size_t window = 3) {
  const Tensor& xv = g.value(x);
  detail::expect_rank(xv, 3, "maxpool1d", "input");
  if (window == 0) throw ShapeError("maxpool1d: window must be >= 1");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), time = xv.dim(2);
  if (time < window) {
    throw ShapeError("maxpool1d: time " + std::to_string(time) + " shorter than window " +
                     std::to_string(window));
  }
  const std::size_t tout = time / window;
  Tensor out({batch, ch, tout});
  std::vector<std::size_t> argmax(batch * ch * tout);
  for (std::size_t row = 0; row < batch * ch; ++row) {
    const double* src = xv.data().data() + row * time;
    for (std::size_t t = 0; t < tout; ++t) {
      std::size_t best = t * window;
      for (std::size_t i = best + 1; i < (t + 1) * window; ++i) {
        if (src[i] > src[best]) best = i;
      }
      out[row * tout + t] = src[best];
      argmax[row * tout + t] = row * time + best;
    }
  }
  return g.record("maxpool1d", {x}, std::move(out),
                  [x, argmax = std::move(argmax)](Graph& gr, const Tensor& go) {
                    Tensor* dx = gr.grad_sink(x);
                    if (!dx) return;
                    for (std::size_t i = 0; i < argmax.size(); ++i) (*dx)[argmax[i]] += go[i];
                  });
}

enum class Mode { train, eval };

/// Running statistics owned by the layer, not the graph.
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;

  explicit BatchNormState(std::size_t channels = 0) : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

struct BatchNormOptions {
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel normalization over batch and time of x [B, C, T].
/// Train mode uses batch statistics (biased variance) and updates the running
/// statistics (unbiased variance); eval mode uses the running statistics.
inline NodeId batchnorm1d(Graph& g, NodeId x, NodeId gamma, NodeId beta, BatchNormState& state, Mode mode,
                          BatchNormOptions opt = {}) {
  const Tensor& xv = g.value(x);
  detail::expect_rank(xv, 3, "batchnorm1d", "input");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), time = xv.dim(2);
  if (g.value(gamma).size() != ch || g.value(beta).size() != ch) {
    throw ShapeError("batchnorm1d: gamma/beta length must equal channels " + std::to_string(ch));
  }
  if (state.running_mean.size() != ch || state.running_var.size() != ch) {
    throw ShapeError("batchnorm1d: running statistics sized for " + std::to_string(state.running_mean.size()) +
                     " channels, input has " + std::to_string(ch));
  }
  if (mode == Mode::train && batch < 2) {
    throw InvalidInput("batchnorm1d: train mode requires batch >= 2, got " + std::to_string(batch));
  }
  const std::size_t n = batch * time;
  std::vector<double> mean(ch), inv_std(ch);
  if (mode == Mode::train) {
    for (std::size_t c = 0; c < ch; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < time; ++t) s += xv.at(b, c, t);
      const double m = s / static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < time; ++t) {
          const double d = xv.at(b, c, t) - m;
          ss += d * d;
        }
      const double var = ss / static_cast<double>(n);
      mean[c] = m;
      inv_std[c] = 1.0 / std::sqrt(var + opt.eps);
      state.running_mean[c] = (1.0 - opt.momentum) * state.running_mean[c] + opt.momentum * m;
      const double unbiased = n > 1 ? ss / static_cast<double>(n - 1) : var;
      state.running_var[c] = (1.0 - opt.momentum) * state.running_var[c] + opt.momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      mean[c] = state.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + opt.eps);
    }
  }

  const Tensor& gv = g.value(gamma);
  const Tensor& bv = g.value(beta);
  Tensor xhat(xv.shape());
  Tensor out(xv.shape());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t t = 0; t < time; ++t) {
        const double h = (xv.at(b, c, t) - mean[c]) * inv_std[c];
        xhat.at(b, c, t) = h;
        out.at(b, c, t) = gv[c] * h + bv[c];
      }

  const bool batch_stats = mode == Mode::train;
  return g.record(
      "batchnorm1d", {x, gamma, beta}, std::move(out),
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& gr, const Tensor& go) {
        const Tensor& gv = gr.value(gamma);
        std::vector<double> sum_dy(ch, 0.0), sum_dy_xhat(ch, 0.0);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < ch; ++c)
            for (std::size_t t = 0; t < time; ++t) {
              sum_dy[c] += go.at(b, c, t);
              sum_dy_xhat[c] += go.at(b, c, t) * xhat.at(b, c, t);
            }
        if (Tensor* dg = gr.grad_sink(gamma))
          for (std::size_t c = 0; c < ch; ++c) (*dg)[c] += sum_dy_xhat[c];
        if (Tensor* db = gr.grad_sink(beta))
          for (std::size_t c = 0; c < ch; ++c) (*db)[c] += sum_dy[c];
        Tensor* dx = gr.grad_sink(x);
        if (!dx) return;
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < ch; ++c) {
            const double scale = gv[c] * inv_std[c];
            for (std::size_t t = 0; t < time; ++t) {
              double d = go.at(b, c, t);
              if (batch_stats) d -= (sum_dy[c] + xhat.at(b, c, t) * sum_dy_xhat[c]) * inv_n;
              dx->at(b, c, t) += scale * d;
            }
          }
      });
}

/// y = x for x >= 0, slope * x otherwise; derivative 1 at 0.
inline NodeId leaky_relu(Graph& g, NodeId x, double slope = 0.3) {
  return detail::unary(
      g, x, "leaky_relu", [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v) { return v >= 0.0 ? 1.0 : slope; });
}

inline NodeId relu(Graph& g, NodeId x) {
  return detail::unary(
      g, x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

inline NodeId sigmoid(Graph& g, NodeId x) {
  return detail::unary(g, x, "sigmoid", detail::stable_sigmoid, [](double v) {
    const double s = detail::stable_sigmoid(v);
    return s * (1.0 - s);
  });
}

inline NodeId tanh(Graph& g, NodeId x) {
  return detail::unary(
      g, x, "tanh", [](double v) { return std::tanh(v); },
      [](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
}

/// y = x W (+ b). x [B, in], W [in, out], b [out].
inline NodeId affine(Graph& g, NodeId x, NodeId w, std::optional<NodeId> bias = std::nullopt) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  detail::expect_rank(xv, 2, "affine", "input");
  detail::expect_rank(wv, 2, "affine", "weight");
  const std::size_t batch = xv.dim(0), in = xv.dim(1), outd = wv.dim(1);
  if (wv.dim(0) != in) {
    throw ShapeError("affine: input features " + std::to_string(in) + " != weight rows " +
                     std::to_string(wv.dim(0)));
  }
  if (bias && g.value(*bias).size() != outd) {
    throw ShapeError("affine: bias length " + std::to_string(g.value(*bias).size()) + " != outputs " +
                     std::to_string(outd));
  }
  Tensor out({batch, outd}, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    double* o = &out.at(b, 0);
    if (bias) {
      const Tensor& bv = g.value(*bias);
      for (std::size_t j = 0; j < outd; ++j) o[j] = bv[j];
    }
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xv.at(b, i);
      const double* wr = &wv.at(i, 0);
      for (std::size_t j = 0; j < outd; ++j) o[j] += xi * wr[j];
    }
  }
  std::vector<NodeId> inputs{x, w};
  if (bias) inputs.push_back(*bias);
  return g.record("affine", std::move(inputs), std::move(out), [=](Graph& gr, const Tensor& go) {
    const Tensor& xv = gr.value(x);
    const Tensor& wv = gr.value(w);
    if (bias) {
      if (Tensor* db = gr.grad_sink(*bias))
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t j = 0; j < outd; ++j) (*db)[j] += go.at(b, j);
    }
    if (Tensor* dw = gr.grad_sink(w)) {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < in; ++i) {
          const double xi = xv.at(b, i);
          if (xi == 0.0) continue;
          double* d = &dw->at(i, 0);
          const double* o = &go.at(b, 0);
          for (std::size_t j = 0; j < outd; ++j) d[j] += xi * o[j];
        }
    }
    if (Tensor* dx = gr.grad_sink(x)) {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < in; ++i) {
          const double* wr = &wv.at(i, 0);
          const double* o = &go.at(b, 0);
          double acc = 0.0;
          for (std::size_t j = 0; j < outd; ++j) acc += wr[j] * o[j];
          dx->at(b, i) += acc;
        }
    }
  });
}

namespace detail {

template <class Fwd, class Back>
NodeId binary(Graph& g, NodeId a, NodeId b, const char* kind, Fwd fwd, Back back) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  expect_same(av, bv, kind);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[i]);
  return g.record(kind, {a, b}, std::move(out), [a, b, back](Graph& gr, const Tensor& go) {
    Tensor* da = gr.grad_sink(a);
    Tensor* db = gr.grad_sink(b);
    const Tensor& av = gr.value(a);
    const Tensor& bv = gr.value(b);
    for (std::size_t i = 0; i < go.size(); ++i) {
      const auto [ga, gb] = back(av[i], bv[i]);
      if (da) (*da)[i] += go[i] * ga;
      if (db) (*db)[i] += go[i] * gb;
    }
  });
}

}  // namespace detail

inline NodeId add(Graph& g, NodeId a, NodeId b) {
  return detail::binary(
      g, a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return std::pair{1.0, 1.0}; });
}

inline NodeId sub(Graph& g, NodeId a, NodeId b) {
  return detail::binary(
      g, a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return std::pair{1.0, -1.0}; });
}

inline NodeId mul(Graph& g, NodeId a, NodeId b) {
  return detail::binary(
      g, a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y) { return std::pair{y, x}; });
}

/// Mean over time: [B, C, T] -> [B, C].
inline NodeId mean_time(Graph& g, NodeId x) {
  const Tensor& xv = g.value(x);
  detail::expect_rank(xv, 3, "mean_time", "input");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), time = xv.dim(2);
  Tensor out({batch, ch});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < time; ++t) s += xv.at(b, c, t);
      out.at(b, c) = s / static_cast<double>(time);
    }
  return g.record("mean_time", {x}, std::move(out), [=](Graph& gr, const Tensor& go) {
    Tensor* dx = gr.grad_sink(x);
    if (!dx) return;
    const double inv = 1.0 / static_cast<double>(time);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t t = 0; t < time; ++t) dx->at(b, c, t) += go.at(b, c) * inv;
  });
}

/// x [B, C, T] scaled per (batch, channel) by s [B, C].
inline NodeId scale_channels(Graph& g, NodeId x, NodeId s) {
  const Tensor& xv = g.value(x);
  const Tensor& sv = g.value(s);
  detail::expect_rank(xv, 3, "scale_channels", "input");
  detail::expect_rank(sv, 2, "scale_channels", "scale");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), time = xv.dim(2);
  if (sv.dim(0) != batch || sv.dim(1) != ch) {
    throw ShapeError("scale_channels: scale " + shape_str(sv.shape()) + " does not match input " +
                     shape_str(xv.shape()));
  }
  Tensor out(xv.shape());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t t = 0; t < time; ++t) out.at(b, c, t) = xv.at(b, c, t) * sv.at(b, c);
  return g.record("scale_channels", {x, s}, std::move(out), [=](Graph& gr, const Tensor& go) {
    const Tensor& xv = gr.value(x);
    const Tensor& sv = gr.value(s);
    Tensor* dx = gr.grad_sink(x);
    Tensor* ds = gr.grad_sink(s);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (std::size_t t = 0; t < time; ++t) {
          if (dx) dx->at(b, c, t) += go.at(b, c, t) * sv.at(b, c);
          acc += go.at(b, c, t) * xv.at(b, c, t);
        }
        if (ds) ds->at(b, c) += acc;
      }
  });
}

/// Channels [begin, begin + count) of x [B, C, T].
inline NodeId slice_channels(Graph& g, NodeId x, std::size_t begin, std::size_t count) {
  const Tensor& xv = g.value(x);
  detail::expect_rank(xv, 3, "slice_channels", "input");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), time = xv.dim(2);
  if (begin + count > ch || count == 0) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                     ") outside " + std::to_string(ch) + " channels");
  }
  Tensor out({batch, count, time});
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(&xv.at(b, begin, 0), count * time, &out.at(b, 0, 0));
  return g.record("slice_channels", {x}, std::move(out), [=](Graph& gr, const Tensor& go) {
    Tensor* dx = gr.grad_sink(x);
    if (!dx) return;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < count * time; ++i) (&dx->at(b, begin, 0))[i] += (&go.at(b, 0, 0))[i];
  });
}

/// Concatenates [B, Ci, T] tensors along channels.
inline NodeId concat_channels(Graph& g, const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Tensor& first = g.value(parts.front());
  detail::expect_rank(first, 3, "concat_channels", "input");
  const std::size_t batch = first.dim(0), time = first.dim(2);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (NodeId p : parts) {
    const Tensor& v = g.value(p);
    detail::expect_rank(v, 3, "concat_channels", "input");
    if (v.dim(0) != batch || v.dim(2) != time) {
      throw ShapeError("concat_channels: part " + shape_str(v.shape()) + " incompatible with " +
                       shape_str(first.shape()));
    }
    widths.push_back(v.dim(1));
    total += v.dim(1);
  }
  Tensor out({batch, total, time});
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& v = g.value(parts[i]);
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(&v.at(b, 0, 0), widths[i] * time, &out.at(b, offset, 0));
    offset += widths[i];
  }
  return g.record("concat_channels", parts, std::move(out), [=](Graph& gr, const Tensor& go) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (Tensor* d = gr.grad_sink(parts[i])) {
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t j = 0; j < widths[i] * time; ++j) (&d->at(b, 0, 0))[j] += (&go.at(b, off, 0))[j];
      }
      off += widths[i];
    }
  });
}

/// [B, C, T] -> [B, T, C].
inline NodeId transpose_ct(Graph& g, NodeId x) {
  const Tensor& xv = g.value(x);
  detail::expect_rank(xv, 3, "transpose_ct", "input");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), time = xv.dim(2);
  Tensor out({batch, time, ch});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t t = 0; t < time; ++t) out.at(b, t, c) = xv.at(b, c, t);
  return g.record("transpose_ct", {x}, std::move(out), [=](Graph& gr, const Tensor& go) {
    Tensor* dx = gr.grad_sink(x);
    if (!dx) return;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t t = 0; t < time; ++t) dx->at(b, c, t) += go.at(b, t, c);
  });
}

/// Step t of a sequence x [B, T, F] -> [B, F].
inline NodeId time_step(Graph& g, NodeId x, std::size_t t) {
  const Tensor& xv = g.value(x);
  detail::expect_rank(xv, 3, "time_step", "input");
  const std::size_t batch = xv.dim(0), time = xv.dim(1), feat = xv.dim(2);
  if (t >= time) throw ShapeError("time_step: step " + std::to_string(t) + " >= length " + std::to_string(time));
  Tensor out({batch, feat});
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(&xv.at(b, t, 0), feat, &out.at(b, 0));
  return g.record("time_step", {x}, std::move(out), [=](Graph& gr, const Tensor& go) {
    Tensor* dx = gr.grad_sink(x);
    if (!dx) return;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t f = 0; f < feat; ++f) dx->at(b, t, f) += go.at(b, f);
  });
}

/// Stacks T tensors [B, F] into [B, T, F].
inline NodeId stack_time(Graph& g, const std::vector<NodeId>& steps) {
  if (steps.empty()) throw ShapeError("stack_time: no inputs");
  const Tensor& first = g.value(steps.front());
  detail::expect_rank(first, 2, "stack_time", "step");
  const std::size_t batch = first.dim(0), feat = first.dim(1), time = steps.size();
  Tensor out({batch, time, feat});
  for (std::size_t t = 0; t < time; ++t) {
    const Tensor& v = g.value(steps[t]);
    detail::expect_same(v, first, "stack_time");
    for (std::size_t b = 0; b < batch; ++b) std::copy_n(&v.at(b, 0), feat, &out.at(b, t, 0));
  }
  return g.record("stack_time", steps, std::move(out), [=](Graph& gr, const Tensor& go) {
    for (std::size_t t = 0; t < time; ++t) {
      Tensor* d = gr.grad_sink(steps[t]);
      if (!d) continue;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t f = 0; f < feat; ++f) d->at(b, f) += go.at(b, t, f);
    }
  });
}

/// Per-sample cross-entropy of logits [B, C] against integer labels.
/// Returns a [B] vector, not the mean.
inline NodeId softmax_xent(Graph& g, NodeId logits, std::span<const int> labels) {
  const Tensor& lv = g.value(logits);
  detail::expect_rank(lv, 2, "softmax_xent", "logits");
  const std::size_t batch = lv.dim(0), classes = lv.dim(1);
  if (labels.size() != batch) {
    throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(batch));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InvalidInput("softmax_xent: label " + std::to_string(y) + " outside [0," + std::to_string(classes) + ")");
    }
  }
  std::vector<int> ys(labels.begin(), labels.end());
  Tensor probs({batch, classes});
  Tensor out({batch});
  for (std::size_t b = 0; b < batch; ++b) {
    double mx = lv.at(b, 0);
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, lv.at(b, c));
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(lv.at(b, c) - mx);
    const double log_z = std::log(z);
    for (std::size_t c = 0; c < classes; ++c) probs.at(b, c) = std::exp(lv.at(b, c) - mx - log_z);
    out[b] = log_z - (lv.at(b, static_cast<std::size_t>(ys[b])) - mx);
  }
  return g.record("softmax_xent", {logits}, std::move(out),
                  [=, probs = std::move(probs), ys = std::move(ys)](Graph& gr, const Tensor& go) {
                    Tensor* dl = gr.grad_sink(logits);
                    if (!dl) return;
                    for (std::size_t b = 0; b < batch; ++b)
                      for (std::size_t c = 0; c < classes; ++c) {
                        const double onehot = static_cast<std::size_t>(ys[b]) == c ? 1.0 : 0.0;
                        dl->at(b, c) += go[b] * (probs.at(b, c) - onehot);
                      }
                  });
}

/// Mean of the listed elements of x, summed in the order given. Elements not
/// listed receive exactly zero gradient.
inline NodeId select_mean(Graph& g, NodeId x, std::vector<std::size_t> indices) {
  const Tensor& xv = g.value(x);
  if (indices.empty()) throw InvalidInput("select_mean: empty selection");
  double s = 0.0;
  for (std::size_t i : indices) {
    if (i >= xv.size()) throw ShapeError("select_mean: index " + std::to_string(i) + " out of range");
    s += xv[i];
  }
  const double k = static_cast<double>(indices.size());
  return g.record("select_mean", {x}, Tensor::scalar(s / k),
                  [x, k, indices = std::move(indices)](Graph& gr, const Tensor& go) {
                    Tensor* dx = gr.grad_sink(x);
                    if (!dx) return;
                    const double share = go[0] / k;
                    for (std::size_t i : indices) (*dx)[i] += share;
                  });
}

/// Mean of all elements, summed in storage order.
inline NodeId mean(Graph& g, NodeId x) {
  const std::size_t n = g.value(x).size();
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  return select_mean(g, x, std::move(all));
}

/// Sum of w (a constant of x's shape) times x.
inline NodeId weighted_sum(Graph& g, NodeId x, Tensor weights) {
  const Tensor& xv = g.value(x);
  detail::expect_same(xv, weights, "weighted_sum");
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += weights[i] * xv[i];
  return g.record("weighted_sum", {x}, Tensor::scalar(s),
                  [x, weights = std::move(weights)](Graph& gr, const Tensor& go) {
                    Tensor* dx = gr.grad_sink(x);
                    if (!dx) return;
                    for (std::size_t i = 0; i < weights.size(); ++i) (*dx)[i] += go[0] * weights[i];
                  });
}

/// Same data, new shape.
inline NodeId reshape(Graph& g, NodeId x, Shape shape) {
  Tensor out = g.value(x).reshaped(std::move(shape));
  return g.record("reshape", {x}, std::move(out), [x](Graph& gr, const Tensor& go) {
    Tensor* dx = gr.grad_sink(x);
    if (!dx) return;
    for (std::size_t i = 0; i < go.size(); ++i) (*dx)[i] += go[i];
  });
}

}  // namespace spoofguard::ops
