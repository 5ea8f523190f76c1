#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "spoofguard/error.hpp"
#include "spoofguard/tensor.hpp"

namespace spoofguard {

struct NodeId {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t index = kNone;

  bool valid() const noexcept { return index != kNone; }
  friend bool operator==(NodeId, NodeId) = default;
};

/// Tape for reverse-mode differentiation. Nodes are appended in evaluation
/// order, so the node vector is always a topological order and backward is a
/// single reverse sweep.
class Graph {
 public:
  /// Receives the gradient of the node's output and scatters it into the
  /// gradient sinks of its inputs.
  using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;

  NodeId constant(Tensor value) { return push("constant", {}, std::move(value), false, nullptr); }

  NodeId parameter(Tensor value) { return push("parameter", {}, std::move(value), true, nullptr); }

  /// Appends an op node. The node requires a gradient iff any input does; the
  /// backward function is dropped otherwise.
  NodeId record(std::string kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward) {
    bool needs = false;
    for (NodeId in : inputs) {
      check(in);
      needs = needs || nodes_[in.index].requires_grad;
    }
    return push(std::move(kind), std::move(inputs), std::move(value), needs,
                needs ? std::move(backward) : nullptr);
  }

  const Tensor& value(NodeId id) const {
    check(id);
    return nodes_[id.index].value;
  }
  const Shape& shape(NodeId id) const { return value(id).shape(); }

  const std::string& kind(NodeId id) const {
    check(id);
    return nodes_[id.index].kind;
  }
  const std::vector<NodeId>& inputs(NodeId id) const {
    check(id);
    return nodes_[id.index].inputs;
  }
  bool requires_grad(NodeId id) const {
    check(id);
    return nodes_[id.index].requires_grad;
  }

  /// Accumulated gradient; zeros of the node's shape if nothing flowed there.
  Tensor grad(NodeId id) const {
    check(id);
    const Node& n = nodes_[id.index];
    return n.grad_ready ? n.grad : Tensor(n.value.shape(), 0.0);
  }

  /// Gradient buffer for an input during backward, or nullptr when that input
  /// does not need a gradient.
  Tensor* grad_sink(NodeId id) {
    check(id);
    Node& n = nodes_[id.index];
    if (!n.requires_grad) return nullptr;
    if (!n.grad_ready) {
      n.grad = Tensor(n.value.shape(), 0.0);
      n.grad_ready = true;
    }
    return &n.grad;
  }

  void backward(NodeId root) {
    check(root);
    if (nodes_[root.index].value.size() != 1) {
      throw ShapeError("backward requires a scalar root, got shape " +
                       shape_str(nodes_[root.index].value.shape()));
    }
    if (!nodes_[root.index].requires_grad) return;
    Tensor* seed = grad_sink(root);
    (*seed)[0] += 1.0;
    for (std::size_t i = root.index + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.grad_ready || !n.backward) continue;
      // No nodes are appended during the sweep, so the reference stays valid.
      n.backward(*this, n.grad);
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    std::string kind;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_ready = false;
    BackwardFn backward;
  };

  void check(NodeId id) const {
    if (!id.valid() || id.index >= nodes_.size()) {
      throw InvalidInput("graph node id out of range");
    }
  }

  NodeId push(std::string kind, std::vector<NodeId> inputs, Tensor value, bool needs, BackwardFn fn) {
    nodes_.push_back(Node{std::move(kind), std::move(inputs), std::move(value), Tensor{}, needs, false,
                          std::move(fn)});
    return NodeId{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace spoofguard
