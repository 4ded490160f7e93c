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

#ifndef RLSD_MODELS_HPP_
#define RLSD_MODELS_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlsd/backbone.hpp"
#include "rlsd/fusion.hpp"
#include "rlsd/geometry.hpp"
#include "rlsd/label_rnn.hpp"
#include "rlsd/localizer.hpp"
#include "rlsd/ops.hpp"
#include "rlsd/params.hpp"
#include "rlsd/region_encoder.hpp"
#include "rlsd/rng.hpp"
#include "rlsd/tensor.hpp"

namespace rlsd {

enum class ModelKind { kMultiCnn, kCnnLstm, kRlsd, kRlsdFtRpn };

std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

// Architecture shared by every model kind.
struct ModelConfig {
  std::size_t num_labels = 12;
  BackboneConfig backbone = BackboneConfig::desk();
  LocalizerConfig localizer;
  std::size_t grid = 7;
  std::size_t encoder_hidden = 256;
  std::size_t feature = 256;
  double dropout = 0.5;
  std::size_t embed = 64;
  std::size_t hidden = 128;
  std::size_t proposals = 32;  // M, excluding the whole-image box
  std::size_t t_max = 8;

  RegionEncoderConfig encoder_config() const;
  LstmConfig lstm_config() const;
};

// Global baseline: the whole image is treated as one region, encoded and fed
// to the LSTM once.
class CnnLstm {
 public:
  CnnLstm(const ModelConfig& config, Rng& rng);

  Tensor global_feature(Tape& tape, const Tensor& image, ops::Mode mode,
                        Rng& rng) const;
  LabelLstm::GlobalResult forward(Tape& tape, const Tensor& image,
                                  std::span<const double> truth, ops::Mode mode,
                                  Rng& rng) const;
  std::vector<double> predict(const Tensor& image) const;

  const Backbone& backbone() const { return backbone_; }
  const RegionEncoder& encoder() const { return encoder_; }
  const LabelLstm& lstm() const { return lstm_; }
  ParamSet params() const;

 private:
  ModelConfig config_;
  Backbone backbone_;
  RegionEncoder encoder_;
  LabelLstm lstm_;
};

class RlsdModel {
 public:
  RlsdModel(const ModelConfig& config, Rng& rng);

  struct Forward {
    std::vector<ScoredBox> proposals;  // last one is the whole image
    RegionUnroll unroll;
    Tensor fused;                      // [L], pre-softmax scores
    std::optional<Localizer::Output> localizer;  // when fine-tuning
  };

  // With `finetune`, the localizer runs on `tape` and region boxes carry
  // gradients back into it; otherwise proposals are constants.
  Forward forward(Tape& tape, const Tensor& image, ops::Mode mode, Rng& rng,
                  bool finetune) const;
  // Scores from externally supplied regions (whole image appended).
  Forward forward_with_regions(Tape& tape, const Tensor& image,
                               std::span<const Box> regions, ops::Mode mode,
                               Rng& rng) const;
  std::vector<double> predict(const Tensor& image) const;
  std::vector<double> predict_with_regions(const Tensor& image,
                                           std::span<const Box> regions) const;

  const ModelConfig& config() const { return config_; }
  const Localizer& localizer() const { return localizer_; }
  const Backbone& backbone() const { return backbone_; }
  const RegionEncoder& encoder() const { return encoder_; }
  const LabelLstm& lstm() const { return lstm_; }
  ParamSet params() const;
  // Everything except the localizer.
  ParamSet recognition_params() const;

 private:
  Forward run_regions(Tape& tape, const FeatureMap& fm, std::vector<Tensor> boxes,
                      std::vector<ScoredBox> proposals, ops::Mode mode,
                      Rng& rng) const;

  ModelConfig config_;
  Localizer localizer_;
  Backbone backbone_;
  RegionEncoder encoder_;
  LabelLstm lstm_;
};

}  // namespace rlsd

#endif  // RLSD_MODELS_HPP_
