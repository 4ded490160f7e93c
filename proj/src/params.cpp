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

#include "rlsd/params.hpp"

#include <cmath>
#include <stdexcept>

namespace rlsd {

void ParamSet::add(std::string name, Tensor tensor) {
  if (find(name) != nullptr) {
    throw std::invalid_argument("duplicate parameter name '" + name + "'");
  }
  items_.push_back({std::move(name), std::move(tensor)});
}

void ParamSet::append(const ParamSet& other, const std::string& prefix) {
  for (const NamedTensor& nt : other.items_) add(prefix + nt.name, nt.tensor);
}

const Tensor* ParamSet::find(std::string_view name) const {
  for (const NamedTensor& nt : items_) {
    if (nt.name == name) return &nt.tensor;
  }
  return nullptr;
}

std::size_t ParamSet::numel() const {
  std::size_t n = 0;
  for (const NamedTensor& nt : items_) n += nt.tensor.size();
  return n;
}

void ParamSet::zero_grad() const {
  for (const NamedTensor& nt : items_) {
    Tensor t = nt.tensor;
    t.zero_grad();
  }
}

void ParamSet::set_requires_grad(bool value) const {
  for (const NamedTensor& nt : items_) {
    Tensor t = nt.tensor;
    t.set_requires_grad(value);
  }
}

void ParamSet::copy_from(const ParamSet& source) const {
  for (const NamedTensor& nt : items_) {
    const Tensor* src = source.find(nt.name);
    if (src == nullptr) {
      throw std::invalid_argument("missing parameter '" + nt.name + "'");
    }
    if (src->shape() != nt.tensor.shape()) {
      throw std::invalid_argument("parameter '" + nt.name + "' has shape " +
                                  shape_str(src->shape()) + ", expected " +
                                  shape_str(nt.tensor.shape()));
    }
    Tensor dst = nt.tensor;
    std::copy(src->data().begin(), src->data().end(), dst.data().begin());
  }
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
  const double a =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-a, a);
  return t;
}

}  // namespace rlsd
