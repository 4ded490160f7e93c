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

#ifndef RLSD_LOCALIZER_HPP_
#define RLSD_LOCALIZER_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rlsd/backbone.hpp"
#include "rlsd/geometry.hpp"
#include "rlsd/params.hpp"
#include "rlsd/rng.hpp"
#include "rlsd/tensor.hpp"

namespace rlsd {

struct AnchorConfig {
  std::vector<double> scales = {8.0, 16.0, 24.0, 40.0};
  std::vector<double> ratios = {0.5, 1.0, 2.0};

  std::size_t k() const { return scales.size() * ratios.size(); }
};

// Anchors for every cell of an fh x fw map, ordered by (row, col, scale,
// ratio). Anchor (scale s, ratio r) has w = s*sqrt(r), h = s/sqrt(r).
std::vector<AnchorBox> generate_anchors(std::size_t fh, std::size_t fw,
                                        std::size_t stride,
                                        std::span<const double> scales,
                                        std::span<const double> ratios);

struct LocalizerConfig {
  BackboneConfig backbone = BackboneConfig::desk();
  AnchorConfig anchors;
  std::size_t head_channels = 64;
  double nms_threshold = 0.7;
};

// View over the (4+1)*k score map: channel a*5+c holds coordinate c
// (tx, ty, tw, th, logit) of anchor a at each cell.
class AnchorScores {
 public:
  AnchorScores(Tensor raw, std::size_t k);

  const Tensor& raw() const { return raw_; }
  std::size_t k() const { return k_; }
  std::size_t count() const { return k_ * fh_ * fw_; }
  std::size_t fh() const { return fh_; }
  std::size_t fw() const { return fw_; }

  // Flat index into raw() of component c (0..4) of anchor `anchor`.
  std::size_t flat_index(std::size_t anchor, std::size_t component) const;
  BoxDeltas deltas(std::size_t anchor) const;
  double logit(std::size_t anchor) const;
  double confidence(std::size_t anchor) const;

 private:
  Tensor raw_;
  std::size_t k_, fh_, fw_;
};

// Minibatch of anchors for the localization objective.
struct SampledBatch {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  std::vector<std::size_t> matched;  // gt index per positive (iou mode)
  std::size_t m = 0;
};

enum class SampleMode { kConfidence, kIou };

struct SamplingOptions {
  double positive_iou = 0.7;
  double negative_iou = 0.3;
  // Also mark each ground-truth region's best-overlapping anchor positive.
  bool best_anchor_positive = true;
};

SampledBatch sample_minibatch(std::span<const AnchorBox> anchors,
                              std::span<const double> confidences,
                              std::size_t m, SampleMode mode,
                              std::optional<std::span<const Box>> gt_regions,
                              Rng& rng, const SamplingOptions& options = {});

// Mean logistic loss over sampled confidences plus mean SmoothL1 between
// predicted and encoded target deltas over positives.
Tensor localization_loss(Tape& tape, const AnchorScores& scores,
                         std::span<const AnchorBox> anchors,
                         const SampledBatch& batch,
                         std::span<const Box> gt_regions);

// Differentiable decode of one anchor's predicted deltas, clipped to the
// image. Returns [x, y, w, h].
Tensor decode_box(Tape& tape, const AnchorScores& scores, const AnchorBox& anchor,
                  std::size_t anchor_index, double image_w, double image_h);

// Samples a grid_h x grid_w grid at the cell centers of `box` (pixels,
// [x,y,w,h]) from the feature map; output [C, grid_h, grid_w].
// Differentiable w.r.t. features and box.
Tensor bilinear_sample(Tape& tape, const FeatureMap& features, const Tensor& box,
                       std::size_t grid_h = 7, std::size_t grid_w = 7);

// Fully convolutional localization layer over its own backbone.
class Localizer {
 public:
  Localizer(LocalizerConfig config, Rng& rng);

  struct Output {
    FeatureMap features;
    AnchorScores scores;
  };

  // 3x3 conv + ReLU + 3x3 conv producing (4+1)*k channels.
  AnchorScores score_anchors(Tape& tape, const FeatureMap& features) const;
  Output forward(Tape& tape, const Tensor& image) const;

  std::vector<AnchorBox> anchors_for(const FeatureMap& features) const;
  // Decoded, clipped boxes for every anchor with sigmoid confidences.
  std::vector<ScoredBox> decode_all(const AnchorScores& scores,
                                    std::span<const AnchorBox> anchors,
                                    double image_w, double image_h) const;
  // Test-time proposals: NMS top-m plus the whole-image box.
  std::vector<ScoredBox> propose(const Tensor& image, std::size_t m) const;

  const LocalizerConfig& config() const { return config_; }
  const Backbone& backbone() const { return backbone_; }
  ParamSet params() const;

 private:
  LocalizerConfig config_;
  Backbone backbone_;
  Tensor hidden_weight_, hidden_bias_;
  Tensor out_weight_, out_bias_;
};

}  // namespace rlsd

#endif  // RLSD_LOCALIZER_HPP_
