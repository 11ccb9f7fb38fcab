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

#include "fsd/numerics/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "fsd/errors.hpp"

namespace fsd::num {

namespace {

thread_local bool g_grad_enabled = true;

void check_finite(const char* op, const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(std::string(op) + ": produced a non-finite value");
    }
  }
}

NodePtr make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("tensor: zero extent in shape " + shape_string(shape));
  }
  check_finite("tensor", values);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  node->leaf = true;
  return node;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from({n, n}, std::move(v));
}

const Node& Tensor::checked() const {
  if (!node_) throw GraphError("tensor: use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw ShapeError("tensor: axis out of range");
  return s[axis];
}

std::size_t Tensor::size() const { return checked().value.size(); }

std::span<const double> Tensor::data() const { return checked().value; }

std::span<double> Tensor::mutable_data() {
  checked();
  if (!node_->leaf) throw GraphError("tensor: only leaf tensors can be written in place");
  return node_->value;
}

std::vector<double> Tensor::to_vector() const { return checked().value; }

double Tensor::item() const {
  const Node& n = checked();
  if (n.value.size() != 1) throw ShapeError("tensor: item() on non-scalar " + shape_string(n.shape));
  return n.value[0];
}

double Tensor::at(std::size_t i) const {
  const Node& n = checked();
  if (i >= n.value.size()) throw ShapeError("tensor: index out of range");
  return n.value[i];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  const Node& n = checked();
  if (n.shape.size() != 2 || i >= n.shape[0] || j >= n.shape[1]) {
    throw ShapeError("tensor: 2-d index out of range for " + shape_string(n.shape));
  }
  return n.value[i * n.shape[1] + j];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

void Tensor::set_requires_grad(bool value) {
  checked();
  if (!node_->leaf) throw GraphError("tensor: requires_grad can only be set on leaves");
  node_->requires_grad = value;
}

bool Tensor::has_grad() const { return !checked().grad.empty(); }

std::span<const double> Tensor::grad() const { return checked().grad; }

void Tensor::zero_grad() {
  checked();
  node_->grad.assign(node_->value.size(), 0.0);
  node_->grad_pending = false;
}

Tensor Tensor::clone(bool requires_grad) const {
  const Node& n = checked();
  return from(n.shape, n.value, requires_grad);
}

bool Tensor::is_leaf() const { return checked().leaf; }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(const char* op, Shape shape, std::vector<double> values,
                   std::vector<Tensor> parents, std::function<void(Node&)> backward_fn) {
  check_finite(op, values);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->leaf = false;
  bool needs = false;
  if (g_grad_enabled) {
    for (const Tensor& p : parents) {
      if (p.defined() && p.requires_grad()) {
        needs = true;
        break;
      }
    }
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (Tensor& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void accumulate(Node& self, std::size_t index, std::span<const double> delta) {
  double* g = parent_grad(self, index);
  if (!g) return;
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

void backward(const Tensor& root) {
  if (!root.defined()) throw GraphError("backward: undefined root");
  Node* r = root.node().get();
  if (r->value.size() != 1) {
    throw GraphError("backward: root must be scalar, got " + shape_string(r->shape));
  }
  if (!r->requires_grad) throw GraphError("backward: root is not attached to a recorded graph");
  if (r->consumed) {
    throw GraphError("backward: graph already differentiated; rebuild it after zero_grad");
  }

  // Iterative post-order DFS: every node lands after all of its parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(r, 0);
  visited.insert(r);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->leaf && n->grad_pending) {
      throw GraphError("backward: leaf gradients pending; call zero_grad before another backward");
    }
  }
  for (Node* n : order) {
    if (!n->leaf || n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
  }
  r->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
  for (Node* n : order) {
    if (n->leaf) {
      n->grad_pending = true;
    } else if (n != r) {
      std::vector<double>().swap(n->grad);
    }
  }
  r->consumed = true;
}

}  // namespace fsd::num
