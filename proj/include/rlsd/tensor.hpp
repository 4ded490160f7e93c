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

#ifndef RLSD_TENSOR_HPP_
#define RLSD_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rlsd {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless requires_grad
  bool requires_grad = false;
  bool leaf = true;
  std::uint64_t id = 0;
};

}  // namespace detail

// Dense row-major tensor handle. Copies share storage; use clone() for a deep
// copy. Gradients are only allocated for tensors that require them.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;
  std::uint64_t id() const;

  // Handle semantics: a const handle still refers to mutable storage.
  std::span<double> data() const;
  std::span<double> grad() const;

  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  bool is_leaf() const;
  // Marks a leaf as a trainable parameter and allocates its gradient.
  Tensor& set_requires_grad(bool value);
  void zero_grad();

  // New leaf with copied values and no gradient tracking.
  Tensor detach() const;
  // New leaf with copied values, keeping the requires_grad flag.
  Tensor clone() const;

  bool all_finite() const;

  // Internal: used by op implementations.
  static Tensor make_output(Shape shape, bool requires_grad);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Ordered record of executed primitives. A tape that is not recording turns
// every op into a plain forward computation (used for evaluation).
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return entries_.size(); }

  // True when the op producing an output from these inputs must be recorded.
  bool wants(std::initializer_list<const Tensor*> inputs) const;
  void record(const Tensor& output, BackwardFn fn);

  // Ids of recorded outputs in forward order.
  std::vector<std::uint64_t> forward_order() const;
  // Ids visited by the most recent backward pass, in visit order.
  const std::vector<std::uint64_t>& last_backward_order() const {
    return backward_order_;
  }

  void clear();

 private:
  friend void backward(Tape& tape, const Tensor& loss);

  struct Entry {
    std::shared_ptr<detail::Node> output;
    BackwardFn fn;
  };
  bool recording_;
  std::vector<Entry> entries_;
  std::vector<std::uint64_t> backward_order_;
};

// Accumulates d(loss)/d(leaf) into every tracked leaf reachable on the tape.
// Intermediate gradients are reset first, so repeated calls add exactly one
// more copy of the gradient to each leaf.
void backward(Tape& tape, const Tensor& loss);

}  // namespace rlsd

#endif  // RLSD_TENSOR_HPP_
