// Copyright 2026 The modafm Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MODAFM_AUTODIFF_HPP
#define MODAFM_AUTODIFF_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "modafm/tensor.hpp"

// Define-by-run reverse-mode differentiation. Every op call allocates a node
// holding its forward value and, when any input requires a gradient, a
// closure that scatters the node's gradient into its parents. The graph is
// discarded with the root; trainable leaves persist across steps.
namespace modafm::ad {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class Node;
using NodePtr = std::shared_ptr<Node>;

class Node {
 public:
  using BackwardFn = std::function<void(Node&)>;

  Node(Tensor value, bool requires_grad, std::string op);

  const Tensor& value() const { return value_; }
  // Leaves only; the optimizer and checkpoint loader write through this.
  Tensor& mutable_value() { return value_; }

  const Tensor& grad() const { return grad_; }
  Tensor& mutable_grad() { return grad_; }
  void zero_grad() { grad_.fill(0.0); }

  bool requires_grad() const { return requires_grad_; }
  bool is_leaf() const { return parents_.empty(); }
  const std::string& op() const { return op_; }
  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  const std::vector<NodePtr>& parents() const { return parents_; }

 private:
  friend NodePtr make_node(Tensor value, std::vector<NodePtr> parents, std::string op,
                           BackwardFn backward);
  friend void backward(const NodePtr& root);

  Tensor value_;
  Tensor grad_;
  bool requires_grad_;
  std::string op_;
  std::string name_;
  std::vector<NodePtr> parents_;
  BackwardFn backward_;
};

// Builds an interior node. Parents and the closure are dropped when no parent
// requires a gradient or gradient recording is disabled.
NodePtr make_node(Tensor value, std::vector<NodePtr> parents, std::string op,
                  Node::BackwardFn backward);

NodePtr parameter(Tensor value, std::string name);
NodePtr constant(Tensor value);

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Elementwise ops accept equal shapes, or a rank-1 right operand whose extent
// equals the trailing extent of a rank-2 left operand (row broadcast).
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);

NodePtr matmul(const NodePtr& a, const NodePtr& b);     // (n x k)(k x m)
NodePtr matmul_bt(const NodePtr& a, const NodePtr& b);  // (n x k)(m x k)^T

NodePtr relu(const NodePtr& x);
NodePtr exp(const NodePtr& x);
NodePtr log(const NodePtr& x);  // throws DomainError on non-positive input

// Last-axis reductions; rank-1 inputs are a single row.
NodePtr softmax(const NodePtr& x);
NodePtr log_softmax(const NodePtr& x);

NodePtr sum(const NodePtr& x);   // -> shape [1]
NodePtr mean(const NodePtr& x);  // -> shape [1]
NodePtr scale(const NodePtr& x, double factor);

NodePtr concat_rows(const std::vector<NodePtr>& parts);
NodePtr select_rows(const NodePtr& x, const std::vector<std::size_t>& rows);
// out[i] = x[i, columns[i]] for a rank-2 x; shape [n].
NodePtr gather_columns(const NodePtr& x, const std::vector<std::size_t>& columns);

// Inverted dropout: x * mask / (1 - rate), mask entries in {0, 1}.
NodePtr apply_dropout_mask(const NodePtr& x, const Tensor& mask, double rate);

// Identity forward; multiplies the incoming gradient by -lambda.
NodePtr gradient_reversal(const NodePtr& x, double lambda = 1.0);

// Upstream-gradient free value copy that blocks backpropagation.
NodePtr detach(const NodePtr& x);

// Accumulates d(root)/d(node) into every reachable node requiring a gradient.
// Each node's rule runs once, in reverse topological order.
void backward(const NodePtr& root);

}  // namespace modafm::ad

#endif  // MODAFM_AUTODIFF_HPP
