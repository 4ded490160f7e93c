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

#ifndef RLSD_PARAMS_HPP_
#define RLSD_PARAMS_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlsd/rng.hpp"
#include "rlsd/tensor.hpp"

namespace rlsd {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Ordered collection of named parameter handles. Names are unique.
class ParamSet {
 public:
  void add(std::string name, Tensor tensor);
  // Adds every entry of `other` with `prefix` prepended to its name.
  void append(const ParamSet& other, const std::string& prefix);

  std::span<const NamedTensor> items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  const Tensor* find(std::string_view name) const;
  std::size_t numel() const;

  void zero_grad() const;
  void set_requires_grad(bool value) const;

  // Copies values from same-named tensors of `source`. Every entry here must
  // be present in `source` with an equal shape.
  void copy_from(const ParamSet& source) const;

 private:
  std::vector<NamedTensor> items_;
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng);

}  // namespace rlsd

#endif  // RLSD_PARAMS_HPP_
