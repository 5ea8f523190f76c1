#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spoofguard/error.hpp"
#include "spoofguard/graph.hpp"
#include "spoofguard/tensor.hpp"

namespace spoofguard {

/// Ordered collection of named trainable tensors.
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor value) {
    if (index_.contains(name)) throw InvalidInput("duplicate parameter name '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.push_back({std::move(name), std::move(value)});
    return entries_.back().value;
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  Tensor& get(const std::string& name) { return entries_[index_of(name)].value; }
  const Tensor& get(const std::string& name) const { return entries_[index_of(name)].value; }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw InvalidInput("unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<NamedTensor>& entries() noexcept { return entries_; }
  const std::vector<NamedTensor>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].value == b.entries_[i].value)) return false;
    }
    return true;
  }

 private:
  std::vector<NamedTensor> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parameter leaves of one graph, addressable by name.
class BoundParameters {
 public:
  BoundParameters(Graph& g, const ParameterSet& params) : params_(&params) {
    ids_.reserve(params.size());
    for (const auto& e : params.entries()) ids_.push_back(g.parameter(e.value));
  }

  /// Binds leaves created elsewhere, one per entry of `params` in order.
  BoundParameters(const ParameterSet& params, std::vector<NodeId> ids) : params_(&params), ids_(std::move(ids)) {
    if (ids_.size() != params.size()) {
      throw ShapeError("bound parameters: " + std::to_string(ids_.size()) + " nodes for " +
                       std::to_string(params.size()) + " parameters");
    }
  }

  NodeId operator[](const std::string& name) const { return ids_[params_->index_of(name)]; }
  const std::vector<NodeId>& ids() const noexcept { return ids_; }

  std::vector<Tensor> grads(const Graph& g) const {
    std::vector<Tensor> out;
    out.reserve(ids_.size());
    for (NodeId id : ids_) out.push_back(g.grad(id));
    return out;
  }

 private:
  const ParameterSet* params_;
  std::vector<NodeId> ids_;
};

/// Uniform(-bound, bound) with bound = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace spoofguard
