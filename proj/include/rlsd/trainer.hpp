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

#ifndef RLSD_TRAINER_HPP_
#define RLSD_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rlsd/backbone.hpp"
#include "rlsd/fusion.hpp"
#include "rlsd/localizer.hpp"
#include "rlsd/metrics.hpp"
#include "rlsd/models.hpp"
#include "rlsd/synthdata.hpp"

namespace rlsd {

struct TrainConfig {
  double lr = 1e-5;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::size_t epochs = 10;
  std::size_t batch = 1;  // images per SGD step
  std::size_t m = 32;     // anchors sampled per image (localizer objective)
  double lr_decay = 1.0;  // multiplied into lr every lr_decay_every epochs
  std::size_t lr_decay_every = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochLoss {
  std::size_t epoch = 0;
  double loss = 0.0;
  double seconds = 0.0;  // wall time
};

struct TrainLog {
  std::vector<EpochLoss> epochs;
  std::size_t skipped_steps = 0;

  double seconds() const;
};

using SampleLoss = std::function<Tensor(Tape&, const Sample&, Rng&)>;

// Minibatch SGD over `data`: each image's loss is scaled by 1/batch and the
// gradients summed before one optimizer step. Deterministic in cfg.seed.
TrainLog run_sgd(const ParamSet& params, std::span<const Sample> data,
                 const TrainConfig& cfg, const SampleLoss& loss,
                 const std::string& tag, std::ostream* progress = nullptr);

// Ground-truth regions: object boxes merged by single-linkage clustering of
// their centers, cutoff = fraction * image diagonal.
std::vector<Box> region_targets(const Sample& sample, double cutoff_fraction);

TrainLog train_multi_cnn(const MultiCnn& model, std::span<const Sample> data,
                         const TrainConfig& cfg, std::ostream* progress = nullptr);

TrainLog pretrain_localizer(const Localizer& localizer, std::span<const Sample> data,
                            const TrainConfig& cfg, double cluster_cutoff,
                            std::ostream* progress = nullptr);

// Fraction of ground-truth regions matched (IoU >= iou_threshold) by one of
// the top-m proposals; the whole-image box does not count.
double proposal_recall(const Localizer& localizer, std::span<const Sample> data,
                       std::size_t m, double iou_threshold, double cluster_cutoff);

TrainLog pretrain_global_lstm(const CnnLstm& model, std::span<const Sample> data,
                              const TrainConfig& cfg, std::ostream* progress = nullptr);

// Copies the pretrained localizer and the global LSTM model into `model`.
void init_rlsd(const RlsdModel& model, const Localizer& localizer,
               const CnnLstm& global);

TrainLog train_rlsd(const RlsdModel& model, std::span<const Sample> data,
                    const TrainConfig& cfg, bool finetune_rpn, double cluster_cutoff,
                    std::ostream* progress = nullptr);

// Longest training label set plus one (room for END).
std::size_t horizon_for(std::span<const Sample> data);

using Predictor = std::function<std::vector<double>(const Sample&)>;
std::vector<EvalRecord> make_records(std::span<const Sample> data,
                                     const Predictor& predict);

}  // namespace rlsd

#endif  // RLSD_TRAINER_HPP_
