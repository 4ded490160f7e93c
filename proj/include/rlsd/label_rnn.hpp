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

#ifndef RLSD_LABEL_RNN_HPP_
#define RLSD_LABEL_RNN_HPP_

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rlsd/params.hpp"
#include "rlsd/rng.hpp"
#include "rlsd/tensor.hpp"

namespace rlsd {

struct LstmConfig {
  std::size_t num_labels = 12;  // L; the END token sits at index L
  std::size_t embed = 64;
  std::size_t hidden = 128;
  std::size_t feature = 256;  // region feature length
};

struct LstmState {
  Tensor h;
  Tensor c;
};

struct LstmStep {
  LstmState state;
  Tensor probs;  // [L+1]
};

// Index of the largest entry; ties go to the lowest index.
// M regions unrolled together. steps[t] is [M, L+1]; region m emitted
// steps[0..lengths[m]-1]. Rows past a region's END are never read.
struct RegionUnroll {
  std::vector<Tensor> steps;
  std::vector<std::size_t> lengths;

  std::size_t regions() const { return lengths.size(); }
  std::span<const double> distribution(std::size_t m, std::size_t t) const;
};

std::size_t argmax_first(std::span<const double> values);
// One-hot of argmax(p), the latent label fed back at the next step.
std::vector<double> latent_label(std::span<const double> p);
// y / |y|_1 over the L labels.
std::vector<double> normalized_target(std::span<const double> truth);

class LabelLstm {
 public:
  LabelLstm(LstmConfig config, Rng& rng);

  std::size_t num_labels() const { return config_.num_labels; }
  std::size_t end_index() const { return config_.num_labels; }
  const LstmConfig& config() const { return config_; }

  // batch 0 gives [H] vectors, otherwise [batch, H].
  LstmState zero_state(std::size_t batch = 0) const;
  // Gates sigma(W_x x + W_h h + b), c' = f*c + i*g, h' = o*tanh(c'), then
  // softmax of a linear projection of h' to L+1 logits.
  LstmStep step(Tape& tape, const Tensor& x, const LstmState& state) const;
  // One step from the zero state with x_0 = W_ev v.
  LstmStep init_from_region(Tape& tape, const Tensor& v) const;
  // x_t = W_es S for the one-hot latent label S of `label`.
  Tensor embed_label(Tape& tape, std::size_t label) const;
  Tensor embed_labels(Tape& tape, std::span<const std::size_t> labels) const;

  // Label distributions p_1..p_T for one region. Stops after the first step
  // whose argmax is END; at most t_max steps.
  std::vector<Tensor> unroll_region(Tape& tape, const Tensor& v,
                                    std::size_t t_max) const;
  // Same recurrence as unroll_region for every row of features [M, F].
  RegionUnroll unroll_regions(Tape& tape, const Tensor& features,
                              std::size_t t_max) const;

  struct GlobalResult {
    std::vector<Tensor> distributions;  // p_1..p_T
    Tensor loss;                        // undefined when no truth given
  };
  // Global CNN+LSTM path: feature fed once at step 0, then exactly `steps`
  // steps of latent-label feedback. With truth, loss is the mean over steps
  // of the squared error between p_t (labels only) and y/|y|_1.
  GlobalResult global_forward(Tape& tape, const Tensor& feature,
                              std::span<const double> truth,
                              std::size_t steps) const;

  ParamSet params() const;

 private:
  LstmConfig config_;
  Tensor w_xi_, w_hi_, b_i_;
  Tensor w_xf_, w_hf_, b_f_;
  Tensor w_xo_, w_ho_, b_o_;
  Tensor w_xc_, w_hc_, b_c_;
  Tensor w_ev_, w_es_;
  Tensor w_out_, b_out_;
};

// Element-wise max over steps of the first L entries (END dropped).
std::vector<double> max_over_steps(std::span<const Tensor> distributions,
                                   std::size_t num_labels);

}  // namespace rlsd

#endif  // RLSD_LABEL_RNN_HPP_
