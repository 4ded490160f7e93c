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

#ifndef RLSD_FUSION_HPP_
#define RLSD_FUSION_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "rlsd/label_rnn.hpp"
#include "rlsd/params.hpp"
#include "rlsd/tensor.hpp"

namespace rlsd {

// M x T x L per-region, per-step label scores with the END column dropped.
// Steps after a region stopped are zero.
class PredictionGrid {
 public:
  PredictionGrid(std::size_t regions, std::size_t steps, std::size_t labels);
  // Builds the grid from per-region distributions over L+1 entries.
  static PredictionGrid from_regions(std::span<const std::vector<Tensor>> regions,
                                     std::size_t labels);
  static PredictionGrid from_unroll(const RegionUnroll& unroll, std::size_t labels);

  std::size_t regions() const { return regions_; }
  std::size_t steps() const { return steps_; }
  std::size_t labels() const { return labels_; }
  double at(std::size_t m, std::size_t t, std::size_t j) const {
    return values_[(m * steps_ + t) * labels_ + j];
  }
  void set(std::size_t m, std::size_t t, std::size_t j, double v) {
    values_[(m * steps_ + t) * labels_ + j] = v;
  }

 private:
  std::size_t regions_, steps_, labels_;
  std::vector<double> values_;
};

// p_j = max over (t, m) of p_tm_j.
std::vector<double> max_pool_fusion(const PredictionGrid& grid);

// Differentiable fusion over per-region distributions. Cells are visited in
// (t, m) order and the first maximal cell of each label gets its gradient.
Tensor max_pool_fusion(Tape& tape, std::span<const std::vector<Tensor>> regions,
                       std::size_t labels);

// Same fusion over a batched unroll; cells are visited in (t, m) order.
Tensor max_pool_fusion(Tape& tape, const RegionUnroll& unroll, std::size_t labels);

// sum_l (softmax(p)_l - y_l/|y|_1)^2 for one image.
Tensor fusion_loss(Tape& tape, const Tensor& fused, std::span<const double> truth);

struct SgdOptions {
  double lr = 1e-5;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

// Momentum SGD: v <- mu v + g + wd theta; theta <- theta - lr v.
class Sgd {
 public:
  Sgd(ParamSet params, SgdOptions options);

  // Applies one update from the accumulated gradients. Returns false, and
  // leaves parameters and velocities untouched, if any gradient is
  // non-finite.
  bool step();
  void zero_grad() const { params_.zero_grad(); }

  void set_lr(double lr) { options_.lr = lr; }
  const SgdOptions& options() const { return options_; }
  std::size_t skipped_steps() const { return skipped_; }
  const ParamSet& params() const { return params_; }

 private:
  ParamSet params_;
  SgdOptions options_;
  std::vector<std::vector<double>> velocity_;
  std::size_t skipped_ = 0;
};

}  // namespace rlsd

#endif  // RLSD_FUSION_HPP_
