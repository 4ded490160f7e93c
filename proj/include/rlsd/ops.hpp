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

#ifndef RLSD_OPS_HPP_
#define RLSD_OPS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "rlsd/rng.hpp"
#include "rlsd/tensor.hpp"

// Differentiable primitives. Every op takes the tape it records onto; on a
// non-recording tape they only compute the forward value.
namespace rlsd::ops {

enum class Activation { kRelu, kSigmoid, kTanh };
enum class Mode { kTrain, kEval };

// 3x3 kernels, stride 1, zero padding 1: [C_in,H,W] -> [C_out,H,W].
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernels,
              const Tensor& bias);
// 2x2 window, stride 2: [C,H,W] -> [C,H/2,W/2]. Ties go to the first element
// in row-major order.
Tensor max_pool2d(Tape& tape, const Tensor& input);
// weight [N_out,N_in]; input [N_in] or a batch [B,N_in]. bias may be
// undefined.
Tensor linear(Tape& tape, const Tensor& input, const Tensor& weight,
              const Tensor& bias);
Tensor activation(Tape& tape, const Tensor& input, Activation kind);
inline Tensor relu(Tape& t, const Tensor& x) {
  return activation(t, x, Activation::kRelu);
}
inline Tensor sigmoid(Tape& t, const Tensor& x) {
  return activation(t, x, Activation::kSigmoid);
}
inline Tensor tanh(Tape& t, const Tensor& x) {
  return activation(t, x, Activation::kTanh);
}
// Softmax over all elements, or over each row of a [B,N] input;
// max-subtracted.
Tensor softmax(Tape& tape, const Tensor& input);
// Inverted dropout; identity in eval mode.
Tensor dropout(Tape& tape, const Tensor& input, double rate, Mode mode,
               Rng& rng);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
Tensor square(Tape& tape, const Tensor& a);
Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);
Tensor reshape(Tape& tape, const Tensor& a, Shape shape);
// Flat gather: out[i] = a.data[indices[i]].
Tensor gather(Tape& tape, const Tensor& a, std::span<const std::size_t> indices);
// Concatenates flattened inputs into one vector.
Tensor concat(Tape& tape, std::span<const Tensor> parts);
// [C,H,W] -> [C], spatial mean.
Tensor global_avg_pool(Tape& tape, const Tensor& input);
// Mean over elements of -[y ln p + (1-y) ln(1-p)], p clamped to
// [clamp, 1-clamp]. targets is treated as a constant.
Tensor binary_cross_entropy(Tape& tape, const Tensor& probs,
                            std::span<const double> targets,
                            double clamp = 1e-7);
// Sum over elements of SmoothL1(pred - target); target is a constant.
Tensor smooth_l1(Tape& tape, const Tensor& pred,
                 std::span<const double> target);
// Element-wise max over the first `width` entries of each input. The first
// input attaining the maximum receives the gradient.
Tensor elementwise_max(Tape& tape, std::span<const Tensor> inputs,
                       std::size_t width);

// Scalar helpers without tape involvement.
double smooth_l1_value(double x);
double smooth_l1_derivative(double x);

}  // namespace rlsd::ops

#endif  // RLSD_OPS_HPP_
