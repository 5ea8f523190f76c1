#pragma once

#include <optional>
#include <vector>

#include "spoofguard/graph.hpp"
#include "spoofguard/ops.hpp"

namespace spoofguard {

/// Graph handles for one GRU layer. Input weights are [in, hidden], recurrent
/// weights [hidden, hidden], biases [hidden].
struct GruNodes {
  NodeId w_z, w_r, w_h;
  NodeId u_z, u_r, u_h;
  NodeId b_z, b_r, b_h;
};

struct GruOutput {
  NodeId outputs;  ///< [batch, time, hidden]
  NodeId h_last;   ///< [batch, hidden]
};

/// One step of the recurrence
///   z  = sigmoid(x W_z + h U_z + b_z)
///   r  = sigmoid(x W_r + h U_r + b_r)
///   h~ = tanh(x W_h + (r * h) U_h + b_h)
///   h' = h + z * (h~ - h)
inline NodeId gru_cell(Graph& g, NodeId x, NodeId h, const GruNodes& p) {
  using namespace ops;
  const NodeId z = sigmoid(g, add(g, affine(g, x, p.w_z, p.b_z), affine(g, h, p.u_z)));
  const NodeId r = sigmoid(g, add(g, affine(g, x, p.w_r, p.b_r), affine(g, h, p.u_r)));
  const NodeId cand = tanh(g, add(g, affine(g, x, p.w_h, p.b_h), affine(g, mul(g, r, h), p.u_h)));
  return add(g, h, mul(g, z, sub(g, cand, h)));
}

/// Unrolls the GRU over x [batch, time, in]. h0 defaults to zeros.
inline GruOutput gru_forward(Graph& g, NodeId x, const GruNodes& p, std::optional<NodeId> h0 = std::nullopt) {
  const Tensor& xv = g.value(x);
  ops::detail::expect_rank(xv, 3, "gru_forward", "input");
  const std::size_t batch = xv.dim(0), time = xv.dim(1), in = xv.dim(2);
  const std::size_t hidden = g.value(p.u_z).dim(0);
  for (NodeId w : {p.w_z, p.w_r, p.w_h}) {
    if (g.shape(w) != Shape{in, hidden}) {
      throw ShapeError("gru_forward: input weight " + shape_str(g.shape(w)) + ", expected " +
                       shape_str({in, hidden}));
    }
  }
  for (NodeId u : {p.u_z, p.u_r, p.u_h}) {
    if (g.shape(u) != Shape{hidden, hidden}) {
      throw ShapeError("gru_forward: recurrent weight " + shape_str(g.shape(u)) + ", expected " +
                       shape_str({hidden, hidden}));
    }
  }
  if (time == 0) throw ShapeError("gru_forward: empty sequence");
  NodeId h = h0 ? *h0 : g.constant(Tensor({batch, hidden}, 0.0));
  if (g.shape(h) != Shape{batch, hidden}) {
    throw ShapeError("gru_forward: h0 " + shape_str(g.shape(h)) + ", expected " + shape_str({batch, hidden}));
  }
  std::vector<NodeId> steps;
  steps.reserve(time);
  for (std::size_t t = 0; t < time; ++t) {
    h = gru_cell(g, ops::time_step(g, x, t), h, p);
    steps.push_back(h);
  }
  return {ops::stack_time(g, steps), h};
}

}  // namespace spoofguard
