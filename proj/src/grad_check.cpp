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

#include "rlsd/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlsd {
namespace {

double evaluate(const ScalarFn& f) {
  Tape tape(false);
  const double v = f(tape).item();
  if (!std::isfinite(v)) {
    throw std::domain_error("grad_check: non-finite function value");
  }
  return v;
}

}  // namespace

double grad_check(const ScalarFn& f, const std::vector<Tensor>& points,
                  double h) {
  for (const Tensor& p : points) {
    if (!p.is_leaf() || !p.requires_grad()) {
      throw std::invalid_argument("grad_check: point must be a tracked leaf");
    }
  }
  std::vector<Tensor> pts = points;
  for (Tensor& p : pts) p.zero_grad();
  {
    Tape tape;
    Tensor out = f(tape);
    backward(tape, out);
  }
  double worst = 0.0;
  for (Tensor& p : pts) {
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    auto x = p.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + h;
      const double up = evaluate(f);
      x[i] = saved - h;
      const double down = evaluate(f);
      x[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[i] - numeric) /
                         std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
      worst = std::max(worst, err);
    }
    p.zero_grad();
  }
  return worst;
}

}  // namespace rlsd
