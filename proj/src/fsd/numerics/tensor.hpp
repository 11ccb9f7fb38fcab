// Copyright 2026 The fsdbench Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fsd::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One recorded value of the tape. Interior nodes own a backward closure that
// reads `grad` and accumulates into the parents' grad buffers.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  // Leaf: a backward pass accumulated into `grad` since the last zero_grad.
  bool grad_pending = false;
  // Root: backward already ran from this node.
  bool consumed = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;
};

// Handle to a dense row-major array of doubles. Copies share the node; use
// clone() for an independent leaf.
class Tensor {
 public:
  Tensor() = default;

  // Leaf constructors. All validate finiteness and shape/size agreement.
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  // Only leaves may be written in place (optimizer updates, test setup).
  std::span<double> mutable_data();
  std::vector<double> to_vector() const;

  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  // Leaves only.
  void set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const double> grad() const;
  // Resets the grad buffer to zeros and re-arms the leaf for backward.
  void zero_grad();

  // Independent leaf copy carrying the same values, detached from any tape.
  Tensor clone(bool requires_grad = false) const;
  Tensor detach() const { return clone(false); }

  bool is_leaf() const;
  const NodePtr& node() const { return node_; }

  // Internal: wraps a freshly computed node.
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

 private:
  const Node& checked() const;
  NodePtr node_;
};

// Reverse-mode sweep from a scalar root. Throws GraphError when the root is
// not scalar, the graph was already differentiated, or a reached leaf still
// holds gradients from an earlier backward without zero_grad.
void backward(const Tensor& root);

bool grad_enabled();

// Disables tape recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds an interior node. Checks finiteness of `values`; records parents and
// the closure only when recording is on and some parent requires grad.
Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                   std::vector<Tensor> parents, std::function<void(Node&)> backward_fn);

// Accumulates `delta` into parent `index` of `self` when that parent is
// differentiable.
void accumulate(Node& self, std::size_t index, std::span<const double> delta);

// Grad buffer of parent `index`, or nullptr when it takes no gradient.
inline double* parent_grad(Node& self, std::size_t index) {
  Node& p = *self.parents[index];
  return p.requires_grad ? p.grad.data() : nullptr;
}

inline const std::vector<double>& parent_value(const Node& self, std::size_t index) {
  return self.parents[index]->value;
}

}  // namespace fsd::num
