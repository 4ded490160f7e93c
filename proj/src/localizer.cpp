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

#include "rlsd/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

#include "rlsd/ops.hpp"

namespace rlsd {

std::vector<AnchorBox> generate_anchors(std::size_t fh, std::size_t fw,
                                        std::size_t stride,
                                        std::span<const double> scales,
                                        std::span<const double> ratios) {
  if (scales.empty() || ratios.empty()) {
    throw std::invalid_argument("generate_anchors: empty scales or ratios");
  }
  std::vector<AnchorBox> anchors;
  anchors.reserve(fh * fw * scales.size() * ratios.size());
  const double s = static_cast<double>(stride);
  for (std::size_t i = 0; i < fh; ++i) {
    for (std::size_t j = 0; j < fw; ++j) {
      for (std::size_t si = 0; si < scales.size(); ++si) {
        for (std::size_t ri = 0; ri < ratios.size(); ++ri) {
          const double root = std::sqrt(ratios[ri]);
          anchors.push_back(AnchorBox{
              Box{(static_cast<double>(j) + 0.5) * s,
                  (static_cast<double>(i) + 0.5) * s, scales[si] * root,
                  scales[si] / root},
              si, ri, i, j});
        }
      }
    }
  }
  return anchors;
}

AnchorScores::AnchorScores(Tensor raw, std::size_t k) : raw_(std::move(raw)), k_(k) {
  if (raw_.rank() != 3 || raw_.dim(0) != 5 * k) {
    throw std::invalid_argument("anchor scores need [5k,H,W] with k=" +
                                std::to_string(k) + ", got " +
                                shape_str(raw_.shape()));
  }
  fh_ = raw_.dim(1);
  fw_ = raw_.dim(2);
}

std::size_t AnchorScores::flat_index(std::size_t anchor, std::size_t c) const {
  const std::size_t a = anchor % k_;
  const std::size_t cell = anchor / k_;
  return ((a * 5 + c) * fh_ + cell / fw_) * fw_ + cell % fw_;
}

BoxDeltas AnchorScores::deltas(std::size_t anchor) const {
  const auto d = raw_.data();
  return BoxDeltas{d[flat_index(anchor, 0)], d[flat_index(anchor, 1)],
                   d[flat_index(anchor, 2)], d[flat_index(anchor, 3)]};
}

double AnchorScores::logit(std::size_t anchor) const {
  return raw_.data()[flat_index(anchor, 4)];
}

double AnchorScores::confidence(std::size_t anchor) const {
  return 1.0 / (1.0 + std::exp(-logit(anchor)));
}

namespace {

std::vector<std::size_t> capped(std::vector<std::size_t> v, std::size_t cap,
                                Rng& rng) {
  if (v.size() > cap) {
    rng.shuffle(v);
    v.resize(cap);
    std::sort(v.begin(), v.end());
  }
  return v;
}

}  // namespace

SampledBatch sample_minibatch(std::span<const AnchorBox> anchors,
                              std::span<const double> confidences,
                              std::size_t m, SampleMode mode,
                              std::optional<std::span<const Box>> gt_regions,
                              Rng& rng, const SamplingOptions& options) {
  if (m == 0 || m % 2 != 0) {
    throw std::invalid_argument("minibatch size must be even and positive, got " +
                                std::to_string(m));
  }
  if (m > anchors.size()) {
    throw std::invalid_argument("minibatch size " + std::to_string(m) +
                                " exceeds anchor count " +
                                std::to_string(anchors.size()));
  }
  const std::size_t half = m / 2;
  SampledBatch batch;
  batch.m = m;
  if (mode == SampleMode::kConfidence) {
    if (confidences.size() != anchors.size()) {
      throw std::invalid_argument("confidence mode needs one score per anchor");
    }
    std::vector<std::size_t> order(anchors.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return confidences[a] > confidences[b];
    });
    batch.positives.assign(order.begin(), order.begin() + half);
    batch.negatives.assign(order.end() - half, order.end());
    return batch;
  }

  if (!gt_regions) {
    throw std::invalid_argument("iou-mode sampling needs ground-truth regions");
  }
  const std::span<const Box> gt = *gt_regions;
  std::vector<double> best_iou(anchors.size(), 0.0);
  std::vector<std::size_t> best_gt(anchors.size(), 0);
  std::vector<std::size_t> forced;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    double top = -1.0;
    std::size_t top_anchor = 0;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      const double v = iou(anchors[a].box, gt[g]);
      if (v > best_iou[a]) {
        best_iou[a] = v;
        best_gt[a] = g;
      }
      if (v > top) {
        top = v;
        top_anchor = a;
      }
    }
    if (options.best_anchor_positive && top > 0.0) forced.push_back(top_anchor);
  }
  std::vector<bool> is_forced(anchors.size(), false);
  for (std::size_t a : forced) is_forced[a] = true;
  std::vector<std::size_t> pos, neg;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (best_iou[a] > options.positive_iou || is_forced[a]) {
      pos.push_back(a);
    } else if (best_iou[a] < options.negative_iou) {
      neg.push_back(a);
    }
  }
  batch.positives = capped(std::move(pos), half, rng);
  batch.negatives = capped(std::move(neg), half, rng);
  for (std::size_t a : batch.positives) batch.matched.push_back(best_gt[a]);
  return batch;
}

Tensor localization_loss(Tape& tape, const AnchorScores& scores,
                         std::span<const AnchorBox> anchors,
                         const SampledBatch& batch,
                         std::span<const Box> gt_regions) {
  std::vector<std::size_t> logit_idx;
  std::vector<double> labels;
  for (std::size_t a : batch.positives) {
    logit_idx.push_back(scores.flat_index(a, 4));
    labels.push_back(1.0);
  }
  for (std::size_t a : batch.negatives) {
    logit_idx.push_back(scores.flat_index(a, 4));
    labels.push_back(0.0);
  }
  if (logit_idx.empty()) {
    throw std::invalid_argument("localization_loss: empty minibatch");
  }
  Tensor probs = ops::sigmoid(tape, ops::gather(tape, scores.raw(), logit_idx));
  Tensor loss = ops::binary_cross_entropy(tape, probs, labels);
  if (batch.positives.empty()) return loss;

  if (batch.matched.size() != batch.positives.size()) {
    throw std::invalid_argument("localization_loss: positives lack matched regions");
  }
  std::vector<std::size_t> delta_idx;
  std::vector<double> targets;
  for (std::size_t p = 0; p < batch.positives.size(); ++p) {
    const std::size_t a = batch.positives[p];
    const BoxDeltas t = encode_deltas(anchors[a].box, gt_regions[batch.matched[p]]);
    for (std::size_t c = 0; c < 4; ++c) delta_idx.push_back(scores.flat_index(a, c));
    targets.insert(targets.end(), {t.tx, t.ty, t.tw, t.th});
  }
  Tensor pred = ops::gather(tape, scores.raw(), delta_idx);
  Tensor box_term =
      ops::scale(tape, ops::smooth_l1(tape, pred, targets),
                 1.0 / static_cast<double>(batch.positives.size()));
  return ops::add(tape, loss, box_term);
}

Tensor decode_box(Tape& tape, const AnchorScores& scores, const AnchorBox& anchor,
                  std::size_t anchor_index, double image_w, double image_h) {
  const std::size_t idx[4] = {scores.flat_index(anchor_index, 0),
                              scores.flat_index(anchor_index, 1),
                              scores.flat_index(anchor_index, 2),
                              scores.flat_index(anchor_index, 3)};
  Tensor t = ops::gather(tape, scores.raw(), idx);
  const Box a = anchor.box;
  const auto td = t.data();
  const double tw = std::clamp(td[2], -kMaxLogScale, kMaxLogScale);
  const double th = std::clamp(td[3], -kMaxLogScale, kMaxLogScale);
  const Box raw{a.x + td[0] * a.w, a.y + td[1] * a.h, a.w * std::exp(tw),
                a.h * std::exp(th)};
  const Box clipped = clip_box(raw, image_w, image_h);

  const bool need = tape.wants({&t});
  Tensor out = Tensor::make_output({4}, need);
  out.data()[0] = clipped.x;
  out.data()[1] = clipped.y;
  out.data()[2] = clipped.w;
  out.data()[3] = clipped.h;
  if (need) {
    tape.record(out, [t, out, a, raw, image_w, image_h]() mutable {
      // Per axis: corners lo/hi pass gradient only where not clipped.
      auto axis = [](double center, double extent, double limit, double g_c,
                     double g_e, double& g_center, double& g_extent) {
        const double lo = center - 0.5 * extent, hi = center + 0.5 * extent;
        const double clo = std::clamp(lo, 0.0, limit);
        const double chi = std::clamp(hi, 0.0, limit);
        if (chi - clo < 1.0) {
          g_center = g_extent = 0.0;
          return;
        }
        const double g_lo = 0.5 * g_c - g_e;
        const double g_hi = 0.5 * g_c + g_e;
        const double d_lo = (lo > 0.0 && lo < limit) ? g_lo : 0.0;
        const double d_hi = (hi > 0.0 && hi < limit) ? g_hi : 0.0;
        g_center = d_lo + d_hi;
        g_extent = 0.5 * (d_hi - d_lo);
      };
      const auto g = out.grad();
      double gx, gw, gy, gh;
      axis(raw.x, raw.w, image_w, g[0], g[2], gx, gw);
      axis(raw.y, raw.h, image_h, g[1], g[3], gy, gh);
      const auto td = t.data();
      auto gt = t.grad();
      gt[0] += gx * a.w;
      gt[1] += gy * a.h;
      if (td[2] > -kMaxLogScale && td[2] < kMaxLogScale) gt[2] += gw * raw.w;
      if (td[3] > -kMaxLogScale && td[3] < kMaxLogScale) gt[3] += gh * raw.h;
    });
  }
  return out;
}

Tensor bilinear_sample(Tape& tape, const FeatureMap& fm, const Tensor& box,
                       std::size_t grid_h, std::size_t grid_w) {
  if (box.size() != 4) {
    throw std::invalid_argument("bilinear_sample: box must have 4 values, got " +
                                shape_str(box.shape()));
  }
  const double bx = box.data()[0], by = box.data()[1];
  const double bw = box.data()[2], bh = box.data()[3];
  if (!(bw > 0.0 && bh > 0.0)) {
    throw std::invalid_argument("bilinear_sample: degenerate box (w=" +
                                std::to_string(bw) + ", h=" + std::to_string(bh) +
                                ")");
  }
  const Tensor& f = fm.features;
  const std::size_t c = f.dim(0), fh = f.dim(1), fw = f.dim(2);
  const double s = static_cast<double>(fm.stride);
  const std::size_t n = grid_h * grid_w;

  // Feature coordinate u = pixel / stride - 0.5 puts integer u on cell centers.
  struct Sample {
    std::size_t u0, u1, v0, v1;
    double au, av;
    bool u_free, v_free;
  };
  std::vector<Sample> samples(n);
  for (std::size_t r = 0; r < grid_h; ++r) {
    for (std::size_t q = 0; q < grid_w; ++q) {
      const double px = bx - 0.5 * bw + (static_cast<double>(q) + 0.5) * bw /
                                            static_cast<double>(grid_w);
      const double py = by - 0.5 * bh + (static_cast<double>(r) + 0.5) * bh /
                                            static_cast<double>(grid_h);
      const double u_raw = px / s - 0.5, v_raw = py / s - 0.5;
      const double umax = static_cast<double>(fw - 1);
      const double vmax = static_cast<double>(fh - 1);
      const double u = std::clamp(u_raw, 0.0, umax);
      const double v = std::clamp(v_raw, 0.0, vmax);
      Sample& sm = samples[r * grid_w + q];
      sm.u0 = static_cast<std::size_t>(std::floor(u));
      sm.v0 = static_cast<std::size_t>(std::floor(v));
      sm.u1 = std::min(sm.u0 + 1, fw - 1);
      sm.v1 = std::min(sm.v0 + 1, fh - 1);
      sm.au = u - static_cast<double>(sm.u0);
      sm.av = v - static_cast<double>(sm.v0);
      sm.u_free = u_raw > 0.0 && u_raw < umax;
      sm.v_free = v_raw > 0.0 && v_raw < vmax;
    }
  }

  const bool need = tape.wants({&f, &box});
  Tensor out = Tensor::make_output({c, grid_h, grid_w}, need);
  const double* fd = f.data().data();
  double* od = out.data().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = fd + ch * fh * fw;
    for (std::size_t i = 0; i < n; ++i) {
      const Sample& sm = samples[i];
      od[ch * n + i] =
          (1 - sm.av) * ((1 - sm.au) * plane[sm.v0 * fw + sm.u0] +
                         sm.au * plane[sm.v0 * fw + sm.u1]) +
          sm.av * ((1 - sm.au) * plane[sm.v1 * fw + sm.u0] +
                   sm.au * plane[sm.v1 * fw + sm.u1]);
    }
  }
  if (need) {
    tape.record(out, [f, box, out, samples = std::move(samples), c, fh, fw, n,
                      grid_h, grid_w, s]() mutable {
      const double* g = out.grad().data();
      const double* fd = f.data().data();
      if (f.requires_grad()) {
        double* gf = f.grad().data();
        for (std::size_t ch = 0; ch < c; ++ch) {
          double* plane = gf + ch * fh * fw;
          for (std::size_t i = 0; i < n; ++i) {
            const Sample& sm = samples[i];
            const double gv = g[ch * n + i];
            plane[sm.v0 * fw + sm.u0] += gv * (1 - sm.av) * (1 - sm.au);
            plane[sm.v0 * fw + sm.u1] += gv * (1 - sm.av) * sm.au;
            plane[sm.v1 * fw + sm.u0] += gv * sm.av * (1 - sm.au);
            plane[sm.v1 * fw + sm.u1] += gv * sm.av * sm.au;
          }
        }
      }
      if (box.requires_grad()) {
        double gx = 0, gy = 0, gw = 0, gh = 0;
        for (std::size_t r = 0; r < grid_h; ++r) {
          for (std::size_t q = 0; q < grid_w; ++q) {
            const std::size_t i = r * grid_w + q;
            const Sample& sm = samples[i];
            double du = 0.0, dv = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) {
              const double* plane = fd + ch * fh * fw;
              const double gv = g[ch * n + i];
              const double f00 = plane[sm.v0 * fw + sm.u0];
              const double f01 = plane[sm.v0 * fw + sm.u1];
              const double f10 = plane[sm.v1 * fw + sm.u0];
              const double f11 = plane[sm.v1 * fw + sm.u1];
              du += gv * ((1 - sm.av) * (f01 - f00) + sm.av * (f11 - f10));
              dv += gv * ((1 - sm.au) * (f10 - f00) + sm.au * (f11 - f01));
            }
            if (!sm.u_free) du = 0.0;
            if (!sm.v_free) dv = 0.0;
            // px = x - w/2 + (q+0.5) w / grid_w; u = px / s - 0.5.
            const double fq = (static_cast<double>(q) + 0.5) /
                                  static_cast<double>(grid_w) - 0.5;
            const double fr = (static_cast<double>(r) + 0.5) /
                                  static_cast<double>(grid_h) - 0.5;
            gx += du / s;
            gw += du * fq / s;
            gy += dv / s;
            gh += dv * fr / s;
          }
        }
        auto gb = box.grad();
        gb[0] += gx;
        gb[1] += gy;
        gb[2] += gw;
        gb[3] += gh;
      }
    });
  }
  return out;
}

Localizer::Localizer(LocalizerConfig config, Rng& rng)
    : config_(std::move(config)), backbone_(config_.backbone, rng) {
  const std::size_t c = config_.backbone.channels();
  const std::size_t hc = config_.head_channels;
  const std::size_t out_c = 5 * config_.anchors.k();
  hidden_weight_ = glorot_uniform({hc, c, 3, 3}, c * 9, hc * 9, rng);
  hidden_bias_ = Tensor::zeros({hc});
  out_weight_ = glorot_uniform({out_c, hc, 3, 3}, hc * 9, out_c * 9, rng);
  for (double& v : out_weight_.data()) v *= 0.1;
  out_bias_ = Tensor::zeros({out_c});
  for (const Tensor* t : {&hidden_weight_, &hidden_bias_, &out_weight_, &out_bias_}) {
    Tensor h = *t;
    h.set_requires_grad(true);
  }
}

AnchorScores Localizer::score_anchors(Tape& tape, const FeatureMap& fm) const {
  if (fm.channels() != hidden_weight_.dim(1)) {
    throw std::invalid_argument(
        "score_anchors: feature map has " + std::to_string(fm.channels()) +
        " channels, head expects " + std::to_string(hidden_weight_.dim(1)));
  }
  Tensor h = ops::relu(tape, ops::conv2d(tape, fm.features, hidden_weight_, hidden_bias_));
  return AnchorScores(ops::conv2d(tape, h, out_weight_, out_bias_),
                      config_.anchors.k());
}

Localizer::Output Localizer::forward(Tape& tape, const Tensor& image) const {
  FeatureMap fm = backbone_.extract_features(tape, image);
  AnchorScores scores = score_anchors(tape, fm);
  return Output{std::move(fm), std::move(scores)};
}

std::vector<AnchorBox> Localizer::anchors_for(const FeatureMap& fm) const {
  return generate_anchors(fm.height(), fm.width(), fm.stride,
                          config_.anchors.scales, config_.anchors.ratios);
}

std::vector<ScoredBox> Localizer::decode_all(const AnchorScores& scores,
                                             std::span<const AnchorBox> anchors,
                                             double image_w, double image_h) const {
  std::vector<ScoredBox> out(anchors.size());
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    out[a] = ScoredBox{
        clip_box(decode_deltas(anchors[a].box, scores.deltas(a)), image_w, image_h),
        scores.confidence(a), a};
  }
  return out;
}

std::vector<ScoredBox> Localizer::propose(const Tensor& image, std::size_t m) const {
  Tape tape(false);
  const Output out = forward(tape, image);
  const auto anchors = anchors_for(out.features);
  const double w = static_cast<double>(out.features.image_w);
  const double h = static_cast<double>(out.features.image_h);
  const auto all = decode_all(out.scores, anchors, w, h);
  return nms_select(all, m, config_.nms_threshold, w, h);
}

ParamSet Localizer::params() const {
  ParamSet p;
  p.append(backbone_.params(), "backbone.");
  p.add("head.hidden.weight", hidden_weight_);
  p.add("head.hidden.bias", hidden_bias_);
  p.add("head.out.weight", out_weight_);
  p.add("head.out.bias", out_bias_);
  return p;
}

}  // namespace rlsd
