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

#ifndef RLSD_REGION_ENCODER_HPP_
#define RLSD_REGION_ENCODER_HPP_

#include <cstddef>

#include "rlsd/ops.hpp"
#include "rlsd/params.hpp"
#include "rlsd/rng.hpp"
#include "rlsd/tensor.hpp"

namespace rlsd {

struct RegionEncoderConfig {
  std::size_t channels = 32;
  std::size_t grid = 7;
  std::size_t hidden = 256;
  std::size_t output = 256;
  double dropout = 0.5;

  std::size_t input_size() const { return channels * grid * grid; }
};

// flatten -> linear -> relu -> dropout -> linear -> relu -> dropout.
class RegionEncoder {
 public:
  RegionEncoder(RegionEncoderConfig config, Rng& rng);

  // patch: [C, grid, grid]; returns the region feature v.
  Tensor encode(Tape& tape, const Tensor& patch, ops::Mode mode, Rng& rng) const;
  // patches: [M, C*grid*grid]; returns V of shape [M, output].
  Tensor encode_batch(Tape& tape, const Tensor& patches, ops::Mode mode,
                      Rng& rng) const;

  const RegionEncoderConfig& config() const { return config_; }
  ParamSet params() const;

 private:
  RegionEncoderConfig config_;
  Tensor fc1_weight_, fc1_bias_, fc2_weight_, fc2_bias_;
};

}  // namespace rlsd

#endif  // RLSD_REGION_ENCODER_HPP_
