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

#include "rlsd/backbone.hpp"

#include <stdexcept>
#include <string>

#include "rlsd/ops.hpp"

namespace rlsd {

BackboneConfig BackboneConfig::desk() {
  BackboneConfig c;
  c.stages = {{16, true}, {32, false}, {32, true}, {32, false}};
  return c;
}

BackboneConfig BackboneConfig::vgg16() {
  BackboneConfig c;
  c.stages = {{64, false},  {64, true},   {128, false}, {128, true},
              {256, false}, {256, false}, {256, true},  {512, false},
              {512, false}, {512, true},  {512, false}, {512, false},
              {512, false}};
  c.input_h = 224;
  c.input_w = 224;
  return c;
}

std::size_t BackboneConfig::pool_layers() const {
  std::size_t n = 0;
  for (const ConvStage& s : stages) n += s.pool_after ? 1 : 0;
  return n;
}

std::size_t BackboneConfig::channels() const {
  return stages.empty() ? in_channels : stages.back().out_channels;
}

Shape BackboneConfig::feature_shape() const {
  return {channels(), input_h / stride(), input_w / stride()};
}

void BackboneConfig::validate() const {
  if (stages.empty()) throw std::invalid_argument("backbone has no layers");
  for (const ConvStage& s : stages) {
    if (s.out_channels == 0) {
      throw std::invalid_argument("backbone layer with zero channels");
    }
  }
  const std::size_t s = stride();
  if (input_h % s != 0 || input_w % s != 0) {
    throw std::invalid_argument(
        "input " + std::to_string(input_h) + "x" + std::to_string(input_w) +
        " is not divisible by backbone stride " + std::to_string(s));
  }
}

Backbone::Backbone(BackboneConfig config, Rng& rng)
    : config_(std::move(config)) {
  config_.validate();
  std::size_t c_in = config_.in_channels;
  for (const ConvStage& s : config_.stages) {
    weights_.push_back(glorot_uniform({s.out_channels, c_in, 3, 3}, c_in * 9,
                                      s.out_channels * 9, rng));
    biases_.push_back(Tensor::zeros({s.out_channels}));
    c_in = s.out_channels;
  }
  params().set_requires_grad(true);
}

FeatureMap Backbone::extract_features(Tape& tape, const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != config_.in_channels) {
    throw std::invalid_argument("backbone expects [" +
                                std::to_string(config_.in_channels) +
                                ",H,W] input, got " + shape_str(image.shape()));
  }
  const std::size_t s = config_.stride();
  if (image.dim(1) % s != 0 || image.dim(2) % s != 0) {
    throw std::invalid_argument("image " + shape_str(image.shape()) +
                                " is not divisible by stride " +
                                std::to_string(s));
  }
  Tensor x = image;
  for (std::size_t i = 0; i < config_.stages.size(); ++i) {
    x = ops::relu(tape, ops::conv2d(tape, x, weights_[i], biases_[i]));
    if (config_.stages[i].pool_after) x = ops::max_pool2d(tape, x);
  }
  return FeatureMap{x, image.dim(1), image.dim(2), s};
}

ParamSet Backbone::params() const {
  ParamSet p;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    p.add("conv" + std::to_string(i) + ".weight", weights_[i]);
    p.add("conv" + std::to_string(i) + ".bias", biases_[i]);
  }
  return p;
}

MultiCnn::MultiCnn(BackboneConfig config, std::size_t num_labels, Rng& rng)
    : backbone_(std::move(config), rng) {
  const std::size_t c = backbone_.config().channels();
  fc_weight_ = glorot_uniform({num_labels, c}, c, num_labels, rng);
  fc_bias_ = Tensor::zeros({num_labels});
  fc_weight_.set_requires_grad(true);
  fc_bias_.set_requires_grad(true);
}

Tensor MultiCnn::forward(Tape& tape, const Tensor& image) const {
  const FeatureMap fm = backbone_.extract_features(tape, image);
  Tensor pooled = ops::global_avg_pool(tape, fm.features);
  return ops::sigmoid(tape, ops::linear(tape, pooled, fc_weight_, fc_bias_));
}

ParamSet MultiCnn::params() const {
  ParamSet p;
  p.append(backbone_.params(), "backbone.");
  p.add("head.weight", fc_weight_);
  p.add("head.bias", fc_bias_);
  return p;
}

Tensor multi_cnn_loss(Tape& tape, const Tensor& scores,
                      std::span<const double> truth) {
  return ops::binary_cross_entropy(tape, scores, truth, 1e-7);
}

}  // namespace rlsd
