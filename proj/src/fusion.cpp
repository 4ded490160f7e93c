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

#include "rlsd/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

#include "rlsd/label_rnn.hpp"
#include "rlsd/ops.hpp"

namespace rlsd {

PredictionGrid::PredictionGrid(std::size_t regions, std::size_t steps,
                               std::size_t labels)
    : regions_(regions), steps_(steps), labels_(labels),
      values_(regions * steps * labels, 0.0) {}

PredictionGrid PredictionGrid::from_regions(
    std::span<const std::vector<Tensor>> regions, std::size_t labels) {
  std::size_t steps = 0;
  for (const auto& r : regions) steps = std::max(steps, r.size());
  PredictionGrid grid(regions.size(), steps, labels);
  for (std::size_t m = 0; m < regions.size(); ++m) {
    for (std::size_t t = 0; t < regions[m].size(); ++t) {
      for (std::size_t j = 0; j < labels; ++j) {
        grid.set(m, t, j, regions[m][t].data()[j]);
      }
    }
  }
  return grid;
}

PredictionGrid PredictionGrid::from_unroll(const RegionUnroll& unroll,
                                           std::size_t labels) {
  PredictionGrid grid(unroll.regions(), unroll.steps.size(), labels);
  for (std::size_t m = 0; m < unroll.regions(); ++m) {
    for (std::size_t t = 0; t < unroll.lengths[m]; ++t) {
      const auto p = unroll.distribution(m, t);
      for (std::size_t j = 0; j < labels; ++j) grid.set(m, t, j, p[j]);
    }
  }
  return grid;
}

std::vector<double> max_pool_fusion(const PredictionGrid& grid) {
  if (grid.regions() == 0 || grid.steps() == 0 || grid.labels() == 0) {
    throw std::invalid_argument("max_pool_fusion: empty prediction grid");
  }
  std::vector<double> out(grid.labels());
  for (std::size_t j = 0; j < grid.labels(); ++j) {
    double best = grid.at(0, 0, j);
    for (std::size_t t = 0; t < grid.steps(); ++t) {
      for (std::size_t m = 0; m < grid.regions(); ++m) {
        best = std::max(best, grid.at(m, t, j));
      }
    }
    out[j] = best;
  }
  return out;
}

Tensor max_pool_fusion(Tape& tape, std::span<const std::vector<Tensor>> regions,
                       std::size_t labels) {
  std::size_t steps = 0;
  for (const auto& r : regions) steps = std::max(steps, r.size());
  std::vector<Tensor> cells;
  bool padded = false;
  for (std::size_t t = 0; t < steps; ++t) {
    for (const auto& r : regions) {
      if (t < r.size()) {
        cells.push_back(r[t]);
      } else {
        padded = true;
      }
    }
  }
  if (cells.empty()) throw std::invalid_argument("max_pool_fusion: empty grid");
  // Padding cells hold 0; they only matter if every real entry is negative.
  if (padded) cells.push_back(Tensor::zeros({labels}));
  return ops::elementwise_max(tape, cells, labels);
}

Tensor max_pool_fusion(Tape& tape, const RegionUnroll& unroll, std::size_t labels) {
  const std::size_t m_count = unroll.regions();
  if (m_count == 0 || unroll.steps.empty()) {
    throw std::invalid_argument("max_pool_fusion: empty grid");
  }
  const std::size_t width = unroll.steps.front().dim(1);
  if (labels > width) {
    throw std::invalid_argument("max_pool_fusion: " + std::to_string(labels) +
                                " labels exceed distribution width " +
                                std::to_string(width));
  }
  bool need = false;
  for (const Tensor& s : unroll.steps) need = need || tape.wants({&s});
  Tensor out = Tensor::make_output({labels}, need);
  // Winner per label as (t, m); t == steps.size() marks the padding cell.
  std::vector<std::pair<std::size_t, std::size_t>> winner(labels);
  bool padded = false;
  for (std::size_t len : unroll.lengths) padded = padded || len < unroll.steps.size();
  for (std::size_t j = 0; j < labels; ++j) {
    bool found = false;
    double best = 0.0;
    for (std::size_t t = 0; t < unroll.steps.size(); ++t) {
      const double* d = unroll.steps[t].data().data();
      for (std::size_t m = 0; m < m_count; ++m) {
        if (t >= unroll.lengths[m]) continue;
        const double v = d[m * width + j];
        if (!found || v > best) {
          best = v;
          winner[j] = {t, m};
          found = true;
        }
      }
    }
    if (padded && best < 0.0) {
      best = 0.0;
      winner[j] = {unroll.steps.size(), 0};
    }
    out.data()[j] = best;
  }
  if (need) {
    tape.record(out, [steps = unroll.steps, winner = std::move(winner), out,
                      width]() mutable {
      const auto g = out.grad();
      for (std::size_t j = 0; j < winner.size(); ++j) {
        const auto [t, m] = winner[j];
        if (t < steps.size() && steps[t].requires_grad()) {
          steps[t].grad()[m * width + j] += g[j];
        }
      }
    });
  }
  return out;
}

Tensor fusion_loss(Tape& tape, const Tensor& fused, std::span<const double> truth) {
  if (fused.size() != truth.size()) {
    throw std::invalid_argument("fusion_loss: " + std::to_string(fused.size()) +
                                " scores vs " + std::to_string(truth.size()) +
                                " labels");
  }
  Tensor target = Tensor::from({truth.size()}, normalized_target(truth));
  Tensor q = ops::softmax(tape, fused);
  return ops::sum(tape, ops::square(tape, ops::sub(tape, q, target)));
}

Sgd::Sgd(ParamSet params, SgdOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.lr >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  if (!(options_.momentum >= 0.0 && options_.momentum < 1.0)) {
    throw std::invalid_argument("momentum must be in [0,1)");
  }
  for (const NamedTensor& nt : params_.items()) {
    if (!nt.tensor.requires_grad()) {
      throw std::invalid_argument("parameter '" + nt.name + "' is not tracked");
    }
    velocity_.emplace_back(nt.tensor.size(), 0.0);
  }
}

bool Sgd::step() {
  for (const NamedTensor& nt : params_.items()) {
    for (double g : nt.tensor.grad()) {
      if (!std::isfinite(g)) {
        ++skipped_;
        std::cerr << "sgd: non-finite gradient in '" << nt.name
                  << "', step skipped\n";
        return false;
      }
    }
  }
  const double mu = options_.momentum, lr = options_.lr, wd = options_.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor t = params_.items()[i].tensor;
    auto theta = t.data();
    const auto g = t.grad();
    auto& v = velocity_[i];
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = mu * v[k] + g[k] + wd * theta[k];
      theta[k] -= lr * v[k];
    }
  }
  return true;
}

}  // namespace rlsd
