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

#ifndef RLSD_BACKBONE_HPP_
#define RLSD_BACKBONE_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "rlsd/params.hpp"
#include "rlsd/rng.hpp"
#include "rlsd/tensor.hpp"

namespace rlsd {

struct ConvStage {
  std::size_t out_channels = 0;
  bool pool_after = false;
};

// Stack of 3x3/pad-1 ReLU convolutions with optional 2x2 pools.
struct BackboneConfig {
  std::size_t in_channels = 3;
  std::vector<ConvStage> stages;
  std::size_t input_h = 64;
  std::size_t input_w = 64;

  // 4 convs, 2 pools: stride 4, 32 channels at 64x64 input.
  static BackboneConfig desk();
  // VGG-16 convolutional stack up to conv5_3: stride 16, 512 channels.
  static BackboneConfig vgg16();

  std::size_t conv_layers() const { return stages.size(); }
  std::size_t pool_layers() const;
  std::size_t stride() const { return std::size_t{1} << pool_layers(); }
  std::size_t channels() const;
  // {C, H', W'} for the configured input size.
  Shape feature_shape() const;
  void validate() const;
};

struct FeatureMap {
  Tensor features;  // [C, H', W']
  std::size_t image_h = 0;
  std::size_t image_w = 0;
  std::size_t stride = 1;

  std::size_t channels() const { return features.dim(0); }
  std::size_t height() const { return features.dim(1); }
  std::size_t width() const { return features.dim(2); }
};

class Backbone {
 public:
  Backbone(BackboneConfig config, Rng& rng);

  // image: [in_channels, H, W] with H, W divisible by the stride.
  FeatureMap extract_features(Tape& tape, const Tensor& image) const;

  const BackboneConfig& config() const { return config_; }
  ParamSet params() const;

 private:
  BackboneConfig config_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

// Label-independent baseline: backbone, spatial average pool, one
// fully-connected layer of width L, element-wise sigmoid.
class MultiCnn {
 public:
  MultiCnn(BackboneConfig config, std::size_t num_labels, Rng& rng);

  Tensor forward(Tape& tape, const Tensor& image) const;

  std::size_t num_labels() const { return fc_weight_.dim(0); }
  const Backbone& backbone() const { return backbone_; }
  const Tensor& fc_weight() const { return fc_weight_; }
  const Tensor& fc_bias() const { return fc_bias_; }
  ParamSet params() const;

 private:
  Backbone backbone_;
  Tensor fc_weight_;
  Tensor fc_bias_;
};

// Mean element-wise logistic loss; scores clamped to [1e-7, 1 - 1e-7].
Tensor multi_cnn_loss(Tape& tape, const Tensor& scores,
                      std::span<const double> truth);

}  // namespace rlsd

#endif  // RLSD_BACKBONE_HPP_
