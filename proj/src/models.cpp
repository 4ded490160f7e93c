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

#include "rlsd/models.hpp"

#include <stdexcept>

namespace rlsd {
namespace {

Tensor box_tensor(const Box& b) { return Tensor::from({4}, {b.x, b.y, b.w, b.h}); }

}  // namespace

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kMultiCnn: return "multi-cnn";
    case ModelKind::kCnnLstm: return "cnn-lstm";
    case ModelKind::kRlsd: return "rlsd";
    case ModelKind::kRlsdFtRpn: return "rlsd-ft-rpn";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& name) {
  for (ModelKind k : {ModelKind::kMultiCnn, ModelKind::kCnnLstm, ModelKind::kRlsd,
                      ModelKind::kRlsdFtRpn}) {
    if (model_kind_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown model kind '" + name +
                              "' (expected multi-cnn, cnn-lstm, rlsd or rlsd-ft-rpn)");
}

RegionEncoderConfig ModelConfig::encoder_config() const {
  RegionEncoderConfig c;
  c.channels = backbone.channels();
  c.grid = grid;
  c.hidden = encoder_hidden;
  c.output = feature;
  c.dropout = dropout;
  return c;
}

LstmConfig ModelConfig::lstm_config() const {
  LstmConfig c;
  c.num_labels = num_labels;
  c.embed = embed;
  c.hidden = hidden;
  c.feature = feature;
  return c;
}

CnnLstm::CnnLstm(const ModelConfig& config, Rng& rng)
    : config_(config),
      backbone_(config.backbone, rng),
      encoder_(config.encoder_config(), rng),
      lstm_(config.lstm_config(), rng) {
  backbone_.params().set_requires_grad(true);
}

Tensor CnnLstm::global_feature(Tape& tape, const Tensor& image, ops::Mode mode,
                               Rng& rng) const {
  const FeatureMap fm = backbone_.extract_features(tape, image);
  const Box whole = whole_image_box(static_cast<double>(fm.image_w),
                                    static_cast<double>(fm.image_h));
  Tensor patch = bilinear_sample(tape, fm, box_tensor(whole), config_.grid, config_.grid);
  return encoder_.encode(tape, patch, mode, rng);
}

LabelLstm::GlobalResult CnnLstm::forward(Tape& tape, const Tensor& image,
                                         std::span<const double> truth,
                                         ops::Mode mode, Rng& rng) const {
  return lstm_.global_forward(tape, global_feature(tape, image, mode, rng), truth,
                              config_.t_max);
}

std::vector<double> CnnLstm::predict(const Tensor& image) const {
  Tape tape(false);
  Rng unused(0);
  const auto r = forward(tape, image, {}, ops::Mode::kEval, unused);
  return max_over_steps(r.distributions, config_.num_labels);
}

ParamSet CnnLstm::params() const {
  ParamSet p;
  p.append(backbone_.params(), "backbone.");
  p.append(encoder_.params(), "encoder.");
  p.append(lstm_.params(), "lstm.");
  return p;
}

RlsdModel::RlsdModel(const ModelConfig& config, Rng& rng)
    : config_(config),
      localizer_(config.localizer, rng),
      backbone_(config.backbone, rng),
      encoder_(config.encoder_config(), rng),
      lstm_(config.lstm_config(), rng) {
  localizer_.params().set_requires_grad(true);
  backbone_.params().set_requires_grad(true);
}

RlsdModel::Forward RlsdModel::run_regions(Tape& tape, const FeatureMap& fm,
                                          std::vector<Tensor> boxes,
                                          std::vector<ScoredBox> proposals,
                                          ops::Mode mode, Rng& rng) const {
  std::vector<Tensor> patches;
  patches.reserve(boxes.size());
  for (const Tensor& b : boxes) {
    patches.push_back(bilinear_sample(tape, fm, b, config_.grid, config_.grid));
  }
  const std::size_t in = encoder_.config().input_size();
  Tensor stacked = ops::reshape(tape, ops::concat(tape, patches), {boxes.size(), in});
  Tensor v = encoder_.encode_batch(tape, stacked, mode, rng);
  Forward out;
  out.proposals = std::move(proposals);
  out.unroll = lstm_.unroll_regions(tape, v, config_.t_max);
  out.fused = max_pool_fusion(tape, out.unroll, config_.num_labels);
  return out;
}

RlsdModel::Forward RlsdModel::forward(Tape& tape, const Tensor& image,
                                      ops::Mode mode, Rng& rng, bool finetune) const {
  if (!finetune) {
    std::vector<ScoredBox> props = localizer_.propose(image, config_.proposals);
    std::vector<Tensor> boxes;
    for (const ScoredBox& p : props) boxes.push_back(box_tensor(p.box));
    const FeatureMap fm = backbone_.extract_features(tape, image);
    return run_regions(tape, fm, std::move(boxes), std::move(props), mode, rng);
  }
  Localizer::Output loc = localizer_.forward(tape, image);
  const double w = static_cast<double>(loc.features.image_w);
  const double h = static_cast<double>(loc.features.image_h);
  const auto anchors = localizer_.anchors_for(loc.features);
  const auto all = localizer_.decode_all(loc.scores, anchors, w, h);
  std::vector<ScoredBox> props =
      nms_select(all, config_.proposals, localizer_.config().nms_threshold, w, h);
  std::vector<Tensor> boxes;
  for (const ScoredBox& p : props) {
    if (p.source < anchors.size()) {
      boxes.push_back(decode_box(tape, loc.scores, anchors[p.source], p.source, w, h));
    } else {
      boxes.push_back(box_tensor(p.box));
    }
  }
  const FeatureMap fm = backbone_.extract_features(tape, image);
  Forward out = run_regions(tape, fm, std::move(boxes), std::move(props), mode, rng);
  out.localizer = std::move(loc);
  return out;
}

RlsdModel::Forward RlsdModel::forward_with_regions(Tape& tape, const Tensor& image,
                                                   std::span<const Box> regions,
                                                   ops::Mode mode, Rng& rng) const {
  const FeatureMap fm = backbone_.extract_features(tape, image);
  const double w = static_cast<double>(fm.image_w);
  const double h = static_cast<double>(fm.image_h);
  std::vector<ScoredBox> props;
  std::vector<Tensor> boxes;
  for (const Box& r : regions) {
    const Box b = clip_box(r, w, h);
    props.push_back(ScoredBox{b, 1.0, props.size()});
    boxes.push_back(box_tensor(b));
  }
  const Box whole = whole_image_box(w, h);
  props.push_back(ScoredBox{whole, 1.0, SIZE_MAX});
  boxes.push_back(box_tensor(whole));
  return run_regions(tape, fm, std::move(boxes), std::move(props), mode, rng);
}

std::vector<double> RlsdModel::predict(const Tensor& image) const {
  Tape tape(false);
  Rng unused(0);
  const Forward f = forward(tape, image, ops::Mode::kEval, unused, false);
  return {f.fused.data().begin(), f.fused.data().end()};
}

std::vector<double> RlsdModel::predict_with_regions(const Tensor& image,
                                                    std::span<const Box> regions) const {
  Tape tape(false);
  Rng unused(0);
  const Forward f = forward_with_regions(tape, image, regions, ops::Mode::kEval, unused);
  return {f.fused.data().begin(), f.fused.data().end()};
}

ParamSet RlsdModel::params() const {
  ParamSet p;
  p.append(localizer_.params(), "localizer.");
  p.append(recognition_params(), "");
  return p;
}

ParamSet RlsdModel::recognition_params() const {
  ParamSet p;
  p.append(backbone_.params(), "backbone.");
  p.append(encoder_.params(), "encoder.");
  p.append(lstm_.params(), "lstm.");
  return p;
}

}  // namespace rlsd
