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

#ifndef RLSD_GRAD_CHECK_HPP_
#define RLSD_GRAD_CHECK_HPP_

#include <functional>
#include <vector>

#include "rlsd/tensor.hpp"

namespace rlsd {

// Builds a scalar from tensors that are captured by the closure.
using ScalarFn = std::function<Tensor(Tape&)>;

// Max over coordinates of |analytic - numeric| / max(1e-8, |analytic| +
// |numeric|), with numeric derivatives from central differences of step h.
// Every tensor in `points` must be a leaf that requires grad.
double grad_check(const ScalarFn& f, const std::vector<Tensor>& points,
                  double h = 1e-5);

inline double grad_check(const ScalarFn& f, const Tensor& point,
                         double h = 1e-5) {
  return grad_check(f, std::vector<Tensor>{point}, h);
}

}  // namespace rlsd

#endif  // RLSD_GRAD_CHECK_HPP_
