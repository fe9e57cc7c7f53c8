// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rank4class/error.hpp"
#include "rank4class/tensor.hpp"

namespace rank4class {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode autodiff record.
///
/// Nodes are appended in evaluation order, so reverse insertion order is a
/// topological order and backward() needs no sort. Gradients accumulate
/// additively into each node's slot, which is what makes a node that feeds
/// several consumers come out right.
class Tape {
 public:
  /// Receives the node's own forward value and its accumulated gradient and
  /// adds the chain-rule contribution into the inputs' slots.
  using Backward =
      std::function<void(Tape& tape, const Tensor& out_value, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Input that never needs a gradient (data, masks, noise).
  Var constant(Tensor value) { return push(std::move(value), false, false, nullptr); }

  /// Leaf whose gradient is reported by grad() after backward().
  Var parameter(Tensor value) { return push(std::move(value), true, true, nullptr); }

  /// Records an op output. needs_grad should be true iff any input needs one.
  Var record(Tensor value, bool needs_grad, Backward backward) {
    return push(std::move(value), false, needs_grad, std::move(backward));
  }

  const Tensor& value(Var v) const { return node(v).value; }
  bool needs_grad(Var v) const { return node(v).needs_grad; }
  bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }

  /// Accumulated gradient of the last backward() output w.r.t. v.
  const Tensor& grad(Var v) const {
    const Node& n = node(v);
    if (!n.needs_grad) throw UsageError("grad() of a node that does not require one");
    if (!backward_done_) throw UsageError("grad() before backward()");
    return n.grad;
  }

  /// Slot that backward closures accumulate into; nullptr for constant subgraphs.
  Tensor* grad_slot(std::size_t id) {
    Node& n = nodes_.at(id);
    return n.needs_grad ? &n.grad : nullptr;
  }

  std::vector<Var> parameters() {
    std::vector<Var> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].is_parameter) out.push_back(Var{this, i});
    }
    return out;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  void backward(Var output) {
    const Node& out = node(output);
    if (out.value.size() != 1) {
      throw UsageError("backward() needs a scalar output, got shape " +
                       to_string(out.value.shape()));
    }
    for (Node& n : nodes_) {
      if (n.needs_grad) {
        n.grad = Tensor(n.value.shape(), 0.0);
      }
    }
    backward_done_ = true;
    if (!out.needs_grad) return;
    nodes_[output.id].grad.fill(1.0);
    for (std::size_t i = output.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.needs_grad && n.backward) {
        n.backward(*this, n.value, n.grad);
      }
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    bool is_parameter = false;
    bool needs_grad = false;
  };

  Var push(Tensor value, bool is_parameter, bool needs_grad, Backward backward) {
    if (!value.all_finite()) {
      throw std::domain_error("non-finite value entering tape at node " +
                              std::to_string(nodes_.size()));
    }
    nodes_.push_back(Node{std::move(value), Tensor(), std::move(backward), is_parameter,
                          needs_grad});
    return Var{this, nodes_.size() - 1};
  }

  const Node& node(Var v) const {
    if (v.tape != this) throw UsageError("Var belongs to a different tape");
    return nodes_.at(v.id);
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

}  // namespace rank4class
