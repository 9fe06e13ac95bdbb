// Copyright 2026 The impactlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IMPACTLAB_NN_GRAPH_HPP_
#define IMPACTLAB_NN_GRAPH_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "impactlab/nn/tensor.hpp"

namespace impactlab::nn {

struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

class Graph;

// Called once during the reverse sweep with the id of the node being
// differentiated; it reads grad(self) and accumulates into its parents.
using BackwardFn = std::function<void(Graph&, NodeId self)>;

/// Reverse-mode tape. Nodes are appended in evaluation order, so the append
/// order is already a topological order and backward is a single reverse
/// sweep. Parameters are bound by address and never written by the graph;
/// their gradients are read back with gradient() after backward().
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  NodeId input(Tensor value) { return push(std::move(value), false, nullptr, {}); }

  // Repeated binding of the same parameter returns the same leaf, so a shared
  // layer (the encoder) accumulates all of its uses into one gradient.
  NodeId param(const Parameter& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return it->second;
    NodeId id = push(p.value, true, nullptr, {});
    nodes_[id.index].param = &p;
    param_nodes_.emplace(&p, id);
    param_order_.push_back(&p);
    return id;
  }

  // Appends an op node. requires_grad is inherited from the parents.
  NodeId apply(Tensor value, std::vector<NodeId> parents, BackwardFn backward) {
    bool rg = false;
    for (NodeId p : parents) rg = rg || nodes_.at(p.index).requires_grad;
    return push(std::move(value), rg, rg ? std::move(backward) : BackwardFn{}, std::move(parents));
  }

  const Tensor& value(NodeId id) const { return nodes_.at(id.index).value; }
  bool requires_grad(NodeId id) const { return nodes_.at(id.index).requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

  // Gradient buffer of a node, allocated (zero) on first use.
  Tensor& grad(NodeId id) {
    Node& n = nodes_.at(id.index);
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  bool has_grad(NodeId id) const { return !nodes_.at(id.index).grad.empty(); }

  void backward(NodeId loss) {
    if (nodes_.empty()) throw StateError("backward called on an empty graph (no forward pass recorded)");
    if (loss.index >= nodes_.size()) throw StateError("backward: loss node is not part of this graph");
    if (backward_done_) throw StateError("backward already ran on this graph");
    if (nodes_[loss.index].value.size() != 1) {
      throw ShapeError("backward: loss must be a scalar, got " + shape_string(nodes_[loss.index].value.shape()));
    }
    backward_done_ = true;
    if (!nodes_[loss.index].requires_grad) return;
    grad(loss).fill(1.0);
    for (std::size_t i = loss.index + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
      n.backward(*this, NodeId{i});
    }
  }

  // Gradient of the last backward() w.r.t. a parameter; zeros when the
  // parameter did not take part in the computation.
  Tensor gradient(const Parameter& p) const {
    auto it = param_nodes_.find(&p);
    if (it == param_nodes_.end() || nodes_[it->second.index].grad.empty()) return Tensor(p.value.shape());
    return nodes_[it->second.index].grad;
  }

  // acc[i] += scale * dLoss/dparams[i].
  void accumulate_gradients(const ConstParameterRefs& params, std::vector<Tensor>& acc, double scale = 1.0) const {
    if (!backward_done_) throw StateError("accumulate_gradients called before backward");
    if (acc.size() != params.size()) throw ShapeError("gradient accumulator arity mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto it = param_nodes_.find(params[i]);
      if (it == param_nodes_.end()) continue;
      const Tensor& g = nodes_[it->second.index].grad;
      if (g.empty()) continue;
      if (acc[i].shape() != g.shape()) throw ShapeError("gradient accumulator shape mismatch for " + params[i]->name);
      for (std::size_t j = 0; j < g.size(); ++j) acc[i][j] += scale * g[j];
    }
  }

  // Parameters in first-use order.
  const ConstParameterRefs& parameters() const { return param_order_; }

  // Smallest |pre-activation| seen by any ReLU in this graph; finite
  // differences are only meaningful away from the kink.
  double relu_margin() const { return relu_margin_; }
  void note_relu_margin(double m) { relu_margin_ = std::min(relu_margin_, m); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    std::vector<NodeId> parents;
    const Parameter* param = nullptr;
  };

  NodeId push(Tensor value, bool requires_grad, BackwardFn backward, std::vector<NodeId> parents) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(backward);
    n.parents = std::move(parents);
    nodes_.push_back(std::move(n));
    return NodeId{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
  ConstParameterRefs param_order_;
  double relu_margin_ = std::numeric_limits<double>::infinity();
  bool backward_done_ = false;
};

// Convenience: zero the given accumulators, run backward, and collect one
// gradient tensor per parameter (shape-identical to it).
inline std::vector<Tensor> backprop(Graph& graph, NodeId loss, const ConstParameterRefs& params) {
  std::vector<Tensor> grads = zeros_like(params);
  graph.backward(loss);
  graph.accumulate_gradients(params, grads);
  return grads;
}

inline std::vector<Tensor> backprop(Graph& graph, NodeId loss) {
  ConstParameterRefs params = graph.parameters();
  return backprop(graph, loss, params);
}

}  // namespace impactlab::nn

#endif  // IMPACTLAB_NN_GRAPH_HPP_
