#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spoofguard/error.hpp"
#include "spoofguard/parameters.hpp"
#include "spoofguard/tensor.hpp"

namespace spoofguard {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("adam: lr must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw ConfigError("adam: betas must lie in (0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("adam: eps must be positive");
  }
};

struct AdamState {
  AdamOptions options;
  std::size_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  AdamState() = default;
  explicit AdamState(AdamOptions opt) : options(opt) { options.validate(); }
};

/// Bias-corrected Adam update applied in place. Moment buffers are created
/// on the first call.
inline void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape(), 0.0);
      state.v.emplace_back(p->shape(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state sized for a different model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape() || state.m[i].shape() != grads[i].shape()) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " shape " + shape_str(params[i]->shape()) +
                       " vs gradient " + shape_str(grads[i].shape()));
    }
  }

  const AdamOptions& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::span<double> p = params[i]->data();
    std::span<const double> g = grads[i].data();
    std::span<double> m = state.m[i].data();
    std::span<double> v = state.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      p[j] -= o.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + o.eps);
    }
  }
}

inline void adam_step(ParameterSet& params, std::span<const Tensor> grads, AdamState& state) {
  std::vector<Tensor*> ptrs;
  ptrs.reserve(params.size());
  for (auto& e : params.entries()) ptrs.push_back(&e.value);
  adam_step(std::span<Tensor* const>(ptrs), grads, state);
}

}  // namespace spoofguard
