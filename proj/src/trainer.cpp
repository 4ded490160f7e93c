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

#include "rlsd/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "rlsd/ops.hpp"

namespace rlsd {
namespace {

std::uint64_t tag_hash(const std::string& tag) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : tag) h = (h ^ c) * 1099511628211ULL;
  return h;
}

void require_boxes(std::span<const Sample> data, const char* op) {
  for (const Sample& s : data) {
    if (s.boxes.empty()) {
      throw std::invalid_argument(std::string(op) + ": sample '" + s.id +
                                  "' has no object boxes");
    }
  }
}

}  // namespace

double TrainLog::seconds() const {
  double total = 0.0;
  for (const EpochLoss& e : epochs) total += e.seconds;
  return total;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("train: momentum must be in [0,1)");
  }
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight decay < 0");
  if (m == 0 || m % 2 != 0) throw std::invalid_argument("train: M must be even");
  if (batch == 0) throw std::invalid_argument("train: batch must be >= 1");
  if (!(lr_decay > 0.0)) throw std::invalid_argument("train: lr decay must be > 0");
}

TrainLog run_sgd(const ParamSet& params, std::span<const Sample> data,
                 const TrainConfig& cfg, const SampleLoss& loss,
                 const std::string& tag, std::ostream* progress) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument(tag + ": empty training set");
  Sgd sgd(params, SgdOptions{cfg.lr, cfg.momentum, cfg.weight_decay});
  const std::uint64_t base = Rng::derive(cfg.seed, tag_hash(tag));
  std::vector<std::size_t> order(data.size());
  TrainLog log;
  double lr = cfg.lr;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    if (cfg.lr_decay_every > 0 && epoch > 1 && (epoch - 1) % cfg.lr_decay_every == 0) {
      lr *= cfg.lr_decay;
      sgd.set_lr(lr);
    }
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(Rng::derive(base, 2 * epoch));
    shuffle_rng.shuffle(order);
    double total = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch);
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch) {
      sgd.zero_grad();
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch);
      for (std::size_t i = b0; i < b1; ++i) {
        Rng rng(Rng::derive(Rng::derive(base, 2 * epoch + 1), order[i]));
        Tape tape;
        Tensor l = loss(tape, data[order[i]], rng);
        total += l.item();
        backward(tape, ops::scale(tape, l, inv_batch));
      }
      sgd.step();
    }
    const double mean = total / static_cast<double>(data.size());
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.epochs.push_back({epoch, mean, secs});
    if (progress) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "[%s] epoch %zu/%zu loss %.6f lr %.3g (%.1fs)\n",
                    tag.c_str(), epoch, cfg.epochs, mean, lr, secs);
      *progress << buf << std::flush;
    }
  }
  log.skipped_steps = sgd.skipped_steps();
  return log;
}

std::vector<Box> region_targets(const Sample& sample, double cutoff_fraction) {
  std::vector<Box> boxes;
  for (const LabeledBox& b : sample.boxes) boxes.push_back(b.box);
  const double w = static_cast<double>(sample.image.dim(2));
  const double h = static_cast<double>(sample.image.dim(1));
  return cluster_merge_boxes(boxes, cutoff_fraction * std::hypot(w, h));
}

TrainLog train_multi_cnn(const MultiCnn& model, std::span<const Sample> data,
                         const TrainConfig& cfg, std::ostream* progress) {
  const std::size_t l = model.num_labels();
  return run_sgd(model.params(), data, cfg,
                 [&model, l](Tape& tape, const Sample& s, Rng&) {
                   const auto truth = s.truth(l);
                   return multi_cnn_loss(tape, model.forward(tape, s.image), truth);
                 },
                 "multi-cnn", progress);
}

TrainLog pretrain_localizer(const Localizer& localizer, std::span<const Sample> data,
                            const TrainConfig& cfg, double cluster_cutoff,
                            std::ostream* progress) {
  require_boxes(data, "pretrain_localizer");
  const std::size_t m = cfg.m;
  return run_sgd(localizer.params(), data, cfg,
                 [&localizer, m, cluster_cutoff](Tape& tape, const Sample& s, Rng& rng) {
                   const auto out = localizer.forward(tape, s.image);
                   const auto anchors = localizer.anchors_for(out.features);
                   const auto gt = region_targets(s, cluster_cutoff);
                   const auto batch = sample_minibatch(
                       anchors, {}, m, SampleMode::kIou, std::span<const Box>(gt), rng);
                   return localization_loss(tape, out.scores, anchors, batch, gt);
                 },
                 "localizer", progress);
}

double proposal_recall(const Localizer& localizer, std::span<const Sample> data,
                       std::size_t m, double iou_threshold, double cluster_cutoff) {
  require_boxes(data, "proposal_recall");
  std::size_t hits = 0, total = 0;
  for (const Sample& s : data) {
    const auto gt = region_targets(s, cluster_cutoff);
    const auto props = localizer.propose(s.image, m);
    for (const Box& g : gt) {
      ++total;
      for (const ScoredBox& p : props) {
        if (p.source != SIZE_MAX && iou(p.box, g) >= iou_threshold) {
          ++hits;
          break;
        }
      }
    }
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

TrainLog pretrain_global_lstm(const CnnLstm& model, std::span<const Sample> data,
                              const TrainConfig& cfg, std::ostream* progress) {
  const std::size_t l = model.lstm().num_labels();
  return run_sgd(model.params(), data, cfg,
                 [&model, l](Tape& tape, const Sample& s, Rng& rng) {
                   const auto truth = s.truth(l);
                   return model.forward(tape, s.image, truth, ops::Mode::kTrain, rng).loss;
                 },
                 "cnn-lstm", progress);
}

void init_rlsd(const RlsdModel& model, const Localizer& localizer,
               const CnnLstm& global) {
  model.localizer().params().copy_from(localizer.params());
  model.recognition_params().copy_from(global.params());
}

TrainLog train_rlsd(const RlsdModel& model, std::span<const Sample> data,
                    const TrainConfig& cfg, bool finetune_rpn, double cluster_cutoff,
                    std::ostream* progress) {
  const std::size_t l = model.config().num_labels;
  if (!finetune_rpn) {
    model.localizer().params().set_requires_grad(false);
    if (progress) *progress << "localizer: frozen\n";
    return run_sgd(model.recognition_params(), data, cfg,
                   [&model, l](Tape& tape, const Sample& s, Rng& rng) {
                     const auto truth = s.truth(l);
                     const auto f = model.forward(tape, s.image, ops::Mode::kTrain, rng, false);
                     return fusion_loss(tape, f.fused, truth);
                   },
                   "rlsd", progress);
  }
  require_boxes(data, "train_rlsd(finetune_rpn)");
  model.localizer().params().set_requires_grad(true);
  if (progress) *progress << "localizer: fine-tuned\n";
  const std::size_t m = cfg.m;
  return run_sgd(model.params(), data, cfg,
                 [&model, l, m, cluster_cutoff](Tape& tape, const Sample& s, Rng& rng) {
                   const auto truth = s.truth(l);
                   const auto f = model.forward(tape, s.image, ops::Mode::kTrain, rng, true);
                   const auto& loc = *f.localizer;
                   const auto anchors = model.localizer().anchors_for(loc.features);
                   const auto gt = region_targets(s, cluster_cutoff);
                   const auto batch = sample_minibatch(
                       anchors, {}, m, SampleMode::kIou, std::span<const Box>(gt), rng);
                   return ops::add(tape, fusion_loss(tape, f.fused, truth),
                                   localization_loss(tape, loc.scores, anchors, batch, gt));
                 },
                 "rlsd-ft-rpn", progress);
}

std::size_t horizon_for(std::span<const Sample> data) {
  std::size_t longest = 0;
  for (const Sample& s : data) longest = std::max(longest, s.labels.size());
  return longest + 1;
}

std::vector<EvalRecord> make_records(std::span<const Sample> data,
                                     const Predictor& predict) {
  std::vector<EvalRecord> out;
  out.reserve(data.size());
  for (const Sample& s : data) {
    EvalRecord r;
    r.id = s.id;
    r.scores = predict(s);
    r.truth = s.labels;
    r.boxes = s.boxes;
    r.image_w = static_cast<double>(s.image.dim(2));
    r.image_h = static_cast<double>(s.image.dim(1));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace rlsd
