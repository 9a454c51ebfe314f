// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Reverse-mode differentiation record. Nodes are appended in execution order,
// so a reverse sweep over the node list is a valid reverse topological order.

#include <functional>
#include <vector>

#include "septfa/core/error.hpp"
#include "septfa/nn/param_store.hpp"
#include "septfa/nn/tensor.hpp"

namespace septfa::nn {

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor3& value() const;
  const Shape& shape() const { return value().shape; }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor3& grad_out)>;

  struct Node {
    Tensor3 value;
    Tensor3 grad;
    BackwardFn backward;
    int param_index = -1;
    bool needs_grad = false;
    const ParamStore* store = nullptr;
  };

  Var constant(Tensor3 value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, -1, false});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  Var parameter(const ParamStore& store, int index) {
    const auto& e = store.entry(index);
    nodes_.push_back(Node{Tensor3(e.shape, e.values), {}, nullptr, index, true, &store});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  Var parameter(const ParamStore& store, const std::string& name) {
    return parameter(store, store.find(name));
  }

  // Records an op output. `backward` receives dLoss/dOutput and must
  // accumulate into its inputs via add_grad().
  Var record(Tensor3 value, bool needs_grad, BackwardFn backward) {
    if (!needs_grad) backward = nullptr;
    nodes_.push_back(Node{std::move(value), {}, std::move(backward), -1, needs_grad});
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  const Tensor3& value(int id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  // Allocates the grad buffer of `id` on first use and returns it.
  Tensor3& grad_slot(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad = Tensor3(n.value.shape, 0.0);
    return n.grad;
  }

  void add_grad(Var v, const Tensor3& g) {
    if (!nodes_[v.id].needs_grad) return;
    Tensor3& slot = grad_slot(v.id);
    for (std::size_t i = 0; i < g.size(); ++i) slot.data[i] += g.data[i];
  }

  /// Backpropagates a scalar loss, accumulating parameter gradients into
  /// `sink` (index-aligned with the ParamStore the parameters came from).
  // Parameter gradients land in `sink`. With `owner` set, only parameters of
  // that store are collected; otherwise all must come from a single store.
  void backward(Var loss, GradBuffer& sink, const ParamStore* owner = nullptr) {
    if (nodes_.empty() || !loss.valid() || loss.tape != this || loss.id >= static_cast<int>(nodes_.size())) {
      throw StateError("backward called before any forward computation");
    }
    if (consumed_) throw StateError("backward already run on this tape");
    if (nodes_[loss.id].value.size() != 1) throw StateError("backward requires a scalar loss");
    consumed_ = true;
    const bool pinned = owner != nullptr;
    if (!nodes_[loss.id].needs_grad) return;
    grad_slot(loss.id).data[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.param_index >= 0) {
        if (owner == nullptr) owner = n.store;
        if (n.store != owner) {
          if (!pinned) throw StateError("backward: parameters from several stores need an explicit owner");
          continue;
        }
        if (n.param_index >= static_cast<int>(sink.size())) throw StateError("gradient sink is smaller than the store");
        auto& dst = sink[n.param_index];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad.data[i];
      } else if (n.backward) {
        n.backward(*this, n.grad);
      }
      visited_.push_back(id);
    }
  }

  // Node ids in the order the last backward pass processed them.
  const std::vector<int>& visit_order() const { return visited_; }

 private:
  std::vector<Node> nodes_;
  std::vector<int> visited_;
  bool consumed_ = false;
};

inline const Tensor3& Var::value() const { return tape->value(id); }

}  // namespace septfa::nn
