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

#include "rlsd/label_rnn.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "rlsd/ops.hpp"

namespace rlsd {

std::size_t argmax_first(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> latent_label(std::span<const double> p) {
  std::vector<double> s(p.size(), 0.0);
  s[argmax_first(p)] = 1.0;
  return s;
}

std::vector<double> normalized_target(std::span<const double> truth) {
  double total = 0.0;
  for (double y : truth) total += y;
  if (!(total > 0.0)) {
    throw std::invalid_argument("normalized_target: empty label set");
  }
  std::vector<double> out(truth.begin(), truth.end());
  for (double& v : out) v /= total;
  return out;
}

LabelLstm::LabelLstm(LstmConfig config, Rng& rng) : config_(config) {
  const std::size_t e = config_.embed, h = config_.hidden;
  const std::size_t out = config_.num_labels + 1;
  auto gate = [&](Tensor& wx, Tensor& wh, Tensor& b) {
    wx = glorot_uniform({h, e}, e, h, rng);
    wh = glorot_uniform({h, h}, h, h, rng);
    b = Tensor::zeros({h});
  };
  gate(w_xi_, w_hi_, b_i_);
  gate(w_xf_, w_hf_, b_f_);
  gate(w_xo_, w_ho_, b_o_);
  gate(w_xc_, w_hc_, b_c_);
  w_ev_ = glorot_uniform({e, config_.feature}, config_.feature, e, rng);
  w_es_ = glorot_uniform({e, out}, out, e, rng);
  w_out_ = glorot_uniform({out, h}, h, out, rng);
  b_out_ = Tensor::zeros({out});
  params().set_requires_grad(true);
}

std::span<const double> RegionUnroll::distribution(std::size_t m,
                                                   std::size_t t) const {
  if (m >= lengths.size() || t >= lengths[m]) {
    throw std::out_of_range("region " + std::to_string(m) + " has no step " +
                            std::to_string(t));
  }
  const Tensor& s = steps[t];
  const std::size_t width = s.dim(1);
  return s.data().subspan(m * width, width);
}

LstmState LabelLstm::zero_state(std::size_t batch) const {
  const Shape shape = batch == 0 ? Shape{config_.hidden} : Shape{batch, config_.hidden};
  return LstmState{Tensor::zeros(shape), Tensor::zeros(shape)};
}

LstmStep LabelLstm::step(Tape& tape, const Tensor& x,
                         const LstmState& state) const {
  if (x.rank() == 0 || x.rank() > 2 || x.shape().back() != config_.embed) {
    throw std::invalid_argument("lstm step input is " + shape_str(x.shape()) +
                                ", expected last dimension " +
                                std::to_string(config_.embed));
  }
  const std::size_t batch = x.rank() == 2 ? x.dim(0) : 1;
  if (state.h.size() != batch * config_.hidden ||
      state.c.size() != batch * config_.hidden) {
    throw std::invalid_argument("lstm state does not match hidden size " +
                                std::to_string(config_.hidden));
  }
  auto pre = [&](const Tensor& wx, const Tensor& wh, const Tensor& b) {
    return ops::add(tape, ops::linear(tape, x, wx, b),
                    ops::linear(tape, state.h, wh, Tensor()));
  };
  Tensor i = ops::sigmoid(tape, pre(w_xi_, w_hi_, b_i_));
  Tensor f = ops::sigmoid(tape, pre(w_xf_, w_hf_, b_f_));
  Tensor o = ops::sigmoid(tape, pre(w_xo_, w_ho_, b_o_));
  Tensor g = ops::tanh(tape, pre(w_xc_, w_hc_, b_c_));
  Tensor c = ops::add(tape, ops::mul(tape, f, state.c), ops::mul(tape, i, g));
  Tensor h = ops::mul(tape, o, ops::tanh(tape, c));
  Tensor p = ops::softmax(tape, ops::linear(tape, h, w_out_, b_out_));  // row-wise
  return LstmStep{LstmState{h, c}, p};
}

LstmStep LabelLstm::init_from_region(Tape& tape, const Tensor& v) const {
  if (v.rank() == 0 || v.rank() > 2 || v.shape().back() != config_.feature) {
    throw std::invalid_argument("region feature is " + shape_str(v.shape()) +
                                ", expected last dimension " +
                                std::to_string(config_.feature));
  }
  Tensor x0 = ops::linear(tape, v, w_ev_, Tensor());
  return step(tape, x0, zero_state(v.rank() == 2 ? v.dim(0) : 0));
}

Tensor LabelLstm::embed_label(Tape& tape, std::size_t label) const {
  if (label > config_.num_labels) {
    throw std::out_of_range("label " + std::to_string(label) + " beyond END");
  }
  Tensor onehot = Tensor::zeros({config_.num_labels + 1});
  onehot.data()[label] = 1.0;
  return ops::linear(tape, onehot, w_es_, Tensor());
}

Tensor LabelLstm::embed_labels(Tape& tape,
                               std::span<const std::size_t> labels) const {
  const std::size_t width = config_.num_labels + 1;
  Tensor onehot = Tensor::zeros({labels.size(), width});
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] >= width) {
      throw std::out_of_range("label " + std::to_string(labels[b]) + " beyond END");
    }
    onehot.data()[b * width + labels[b]] = 1.0;
  }
  return ops::linear(tape, onehot, w_es_, Tensor());
}

RegionUnroll LabelLstm::unroll_regions(Tape& tape, const Tensor& features,
                                       std::size_t t_max) const {
  if (t_max == 0) throw std::invalid_argument("unroll_regions: t_max must be >= 1");
  if (features.rank() != 2) {
    throw std::invalid_argument("unroll_regions: features must be [M, F], got " +
                                shape_str(features.shape()));
  }
  const std::size_t m = features.dim(0), width = config_.num_labels + 1;
  LstmStep cur = init_from_region(tape, features);
  RegionUnroll out;
  out.lengths.assign(m, 0);
  std::vector<bool> active(m, true);
  std::vector<std::size_t> prev(m);
  std::size_t live = m;
  for (std::size_t t = 1; t <= t_max && live > 0; ++t) {
    for (std::size_t r = 0; r < m; ++r) {
      prev[r] = argmax_first(cur.probs.data().subspan(r * width, width));
    }
    cur = step(tape, embed_labels(tape, prev), cur.state);
    out.steps.push_back(cur.probs);
    for (std::size_t r = 0; r < m; ++r) {
      if (!active[r]) continue;
      ++out.lengths[r];
      if (argmax_first(cur.probs.data().subspan(r * width, width)) == end_index()) {
        active[r] = false;
        --live;
      }
    }
  }
  return out;
}

std::vector<Tensor> LabelLstm::unroll_region(Tape& tape, const Tensor& v,
                                             std::size_t t_max) const {
  if (t_max == 0) throw std::invalid_argument("unroll_region: t_max must be >= 1");
  LstmStep cur = init_from_region(tape, v);
  std::vector<Tensor> out;
  out.reserve(t_max);
  for (std::size_t t = 1; t <= t_max; ++t) {
    const std::size_t prev = argmax_first(cur.probs.data());
    cur = step(tape, embed_label(tape, prev), cur.state);
    out.push_back(cur.probs);
    if (argmax_first(cur.probs.data()) == end_index()) break;
  }
  return out;
}

LabelLstm::GlobalResult LabelLstm::global_forward(Tape& tape,
                                                  const Tensor& feature,
                                                  std::span<const double> truth,
                                                  std::size_t steps) const {
  if (steps == 0) throw std::invalid_argument("global_forward: steps must be >= 1");
  const std::size_t l = config_.num_labels;
  if (!truth.empty() && truth.size() != l) {
    throw std::invalid_argument("truth has " + std::to_string(truth.size()) +
                                " labels, model has " + std::to_string(l));
  }
  GlobalResult result;
  LstmStep cur = init_from_region(tape, feature);
  std::vector<std::size_t> label_idx(l);
  for (std::size_t j = 0; j < l; ++j) label_idx[j] = j;
  Tensor target;
  if (!truth.empty()) target = Tensor::from({l}, normalized_target(truth));
  std::vector<Tensor> step_losses;
  for (std::size_t t = 1; t <= steps; ++t) {
    const std::size_t prev = argmax_first(cur.probs.data());
    cur = step(tape, embed_label(tape, prev), cur.state);
    result.distributions.push_back(cur.probs);
    if (target.defined()) {
      Tensor diff = ops::sub(tape, ops::gather(tape, cur.probs, label_idx), target);
      step_losses.push_back(ops::sum(tape, ops::square(tape, diff)));
    }
  }
  if (!step_losses.empty()) {
    result.loss = ops::mean(tape, ops::concat(tape, step_losses));
  }
  return result;
}

ParamSet LabelLstm::params() const {
  ParamSet p;
  p.add("W_xi", w_xi_);
  p.add("W_hi", w_hi_);
  p.add("b_i", b_i_);
  p.add("W_xf", w_xf_);
  p.add("W_hf", w_hf_);
  p.add("b_f", b_f_);
  p.add("W_xo", w_xo_);
  p.add("W_ho", w_ho_);
  p.add("b_o", b_o_);
  p.add("W_xc", w_xc_);
  p.add("W_hc", w_hc_);
  p.add("b_c", b_c_);
  p.add("W_ev", w_ev_);
  p.add("W_es", w_es_);
  p.add("W_out", w_out_);
  p.add("b_out", b_out_);
  return p;
}

std::vector<double> max_over_steps(std::span<const Tensor> distributions,
                                   std::size_t num_labels) {
  std::vector<double> out(num_labels, 0.0);
  for (const Tensor& p : distributions) {
    for (std::size_t j = 0; j < num_labels; ++j) out[j] = std::max(out[j], p.data()[j]);
  }
  return out;
}

}  // namespace rlsd
