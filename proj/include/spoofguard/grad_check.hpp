#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "spoofguard/error.hpp"
#include "spoofguard/graph.hpp"

namespace spoofguard {

/// Builds a scalar-valued graph from parameter leaves.
using GraphBuilder = std::function<NodeId(Graph&, std::span<const NodeId>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;  ///< index into the params vector
  std::size_t worst_index = 0;  ///< flat element index within that parameter
  double analytic = 0.0;        ///< values at the worst element
  double numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
};

/// Compares reverse-mode gradients against central differences over every
/// element of every parameter. Relative error is |a - n| / (|a| + |n| + 1e-12).
inline GradCheckReport grad_check(const GraphBuilder& f, std::vector<Tensor> params, GradCheckOptions opt = {}) {
  auto evaluate = [&](bool with_grads, std::vector<Tensor>* grads) {
    Graph g;
    std::vector<NodeId> ids;
    ids.reserve(params.size());
    for (const Tensor& p : params) ids.push_back(g.parameter(p));
    const NodeId out = f(g, ids);
    if (g.value(out).size() != 1) {
      throw ShapeError("grad_check: builder must return a scalar, got " + shape_str(g.shape(out)));
    }
    if (with_grads) {
      g.backward(out);
      for (NodeId id : ids) grads->push_back(g.grad(id));
    }
    return g.value(out)[0];
  };

  std::vector<Tensor> analytic;
  evaluate(true, &analytic);

  GradCheckReport rep;
  rep.max_rel_error = -1.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = params[p][i];
      params[p][i] = orig + opt.step;
      const double fp = evaluate(false, nullptr);
      params[p][i] = orig - opt.step;
      const double fm = evaluate(false, nullptr);
      params[p][i] = orig;
      const double num = (fp - fm) / (2.0 * opt.step);
      const double a = analytic[p][i];
      const double rel = std::abs(a - num) / (std::abs(a) + std::abs(num) + 1e-12);
      ++rep.checked;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_param = p;
        rep.worst_index = i;
        rep.analytic = a;
        rep.numeric = num;
      }
    }
  }
  if (rep.checked == 0) rep.max_rel_error = 0.0;
  rep.passed = rep.max_rel_error < opt.tolerance;
  return rep;
}

}  // namespace spoofguard
