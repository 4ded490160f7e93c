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

#include "rlsd/region_encoder.hpp"

#include <stdexcept>
#include <string>

namespace rlsd {

RegionEncoder::RegionEncoder(RegionEncoderConfig config, Rng& rng)
    : config_(config) {
  const std::size_t in = config_.input_size();
  fc1_weight_ = glorot_uniform({config_.hidden, in}, in, config_.hidden, rng);
  fc1_bias_ = Tensor::zeros({config_.hidden});
  fc2_weight_ = glorot_uniform({config_.output, config_.hidden}, config_.hidden,
                               config_.output, rng);
  fc2_bias_ = Tensor::zeros({config_.output});
  params().set_requires_grad(true);
}

Tensor RegionEncoder::encode(Tape& tape, const Tensor& patch, ops::Mode mode,
                             Rng& rng) const {
  if (patch.size() != config_.input_size()) {
    throw std::invalid_argument("region patch " + shape_str(patch.shape()) +
                                " does not match encoder input of " +
                                std::to_string(config_.input_size()));
  }
  Tensor x = ops::reshape(tape, patch, {config_.input_size()});
  return encode_batch(tape, x, mode, rng);
}

Tensor RegionEncoder::encode_batch(Tape& tape, const Tensor& patches,
                                   ops::Mode mode, Rng& rng) const {
  Tensor h = ops::relu(tape, ops::linear(tape, patches, fc1_weight_, fc1_bias_));
  h = ops::dropout(tape, h, config_.dropout, mode, rng);
  h = ops::relu(tape, ops::linear(tape, h, fc2_weight_, fc2_bias_));
  return ops::dropout(tape, h, config_.dropout, mode, rng);
}

ParamSet RegionEncoder::params() const {
  ParamSet p;
  p.add("fc1.weight", fc1_weight_);
  p.add("fc1.bias", fc1_bias_);
  p.add("fc2.weight", fc2_weight_);
  p.add("fc2.bias", fc2_bias_);
  return p;
}

}  // namespace rlsd
