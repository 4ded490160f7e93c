/*
 * Copyright 2026 The RLSD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "rlsd/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rlsd {
namespace {

std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

std::shared_ptr<detail::Node> make_node(Shape shape, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) {
      throw std::invalid_argument("tensor dimensions must be positive, got " +
                                  shape_str(shape));
    }
  }
  auto node = std::make_shared<detail::Node>();
  const std::size_t n = shape_numel(shape);
  node->shape = std::move(shape);
  node->data.assign(n, 0.0);
  node->requires_grad = requires_grad;
  if (requires_grad) node->grad.assign(n, 0.0);
  node->id = next_node_id();
  return node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_node(std::move(shape), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.data()) v = value;
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw std::invalid_argument("shape " + shape_str(shape) + " needs " +
                                std::to_string(shape_numel(shape)) +
                                " values, got " +
                                std::to_string(values.size()));
  }
  Tensor t = zeros(std::move(shape), requires_grad);
  t.node_->data = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::make_output(Shape shape, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  t.node_->leaf = false;
  return t;
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw std::out_of_range("axis " + std::to_string(axis) +
                            " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::size() const { return shape_numel(shape()); }
std::uint64_t Tensor::id() const { return node_ ? node_->id : 0; }

std::span<double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::grad() const { return node_->grad; }

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("item() on non-scalar tensor " +
                                shape_str(shape()));
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && node_->leaf; }

Tensor& Tensor::set_requires_grad(bool value) {
  if (!node_->leaf) {
    throw std::logic_error("requires_grad can only be changed on leaves");
  }
  node_->requires_grad = value;
  if (value) {
    node_->grad.assign(node_->data.size(), 0.0);
  } else {
    node_->grad.clear();
  }
  return *this;
}

void Tensor::zero_grad() {
  for (double& g : node_->grad) g = 0.0;
}

Tensor Tensor::detach() const {
  return from(shape(), node_->data, false);
}

Tensor Tensor::clone() const {
  return from(shape(), node_->data, node_->requires_grad);
}

bool Tensor::all_finite() const {
  for (double v : node_->data) {
    if (!std::isfinite(v)) return false;
  }
  for (double v : node_->grad) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tape::wants(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void Tape::record(const Tensor& output, BackwardFn fn) {
  entries_.push_back({output.node(), std::move(fn)});
}

std::vector<std::uint64_t> Tape::forward_order() const {
  std::vector<std::uint64_t> ids;
  ids.reserve(entries_.size());
  for (const Entry& e : entries_) ids.push_back(e.output->id);
  return ids;
}

void Tape::clear() {
  entries_.clear();
  backward_order_.clear();
}

void backward(Tape& tape, const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument(
        "backward needs a scalar loss, got shape " +
        (loss.defined() ? shape_str(loss.shape()) : std::string("<none>")));
  }
  if (!std::isfinite(loss.item())) {
    throw std::domain_error("backward on non-finite loss");
  }
  if (!loss.requires_grad()) {
    throw std::invalid_argument("loss does not depend on any tracked tensor");
  }
  for (Tape::Entry& e : tape.entries_) {
    for (double& g : e.output->grad) g = 0.0;
  }
  loss.node()->grad[0] += 1.0;
  tape.backward_order_.clear();
  for (auto it = tape.entries_.rbegin(); it != tape.entries_.rend(); ++it) {
    tape.backward_order_.push_back(it->output->id);
    it->fn();
  }
}

}  // namespace rlsd
