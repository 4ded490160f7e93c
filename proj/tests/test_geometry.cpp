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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "rlsd/backbone.hpp"
#include "rlsd/geometry.hpp"
#include "rlsd/grad_check.hpp"
#include "rlsd/localizer.hpp"
#include "rlsd/ops.hpp"
#include "rlsd/region_encoder.hpp"
#include "test_util.hpp"

namespace rlsd {
namespace {

using testing::random_tensor;
using testing::values;

Box random_box(Rng& rng, double extent = 64.0) {
  return Box{rng.uniform(0, extent), rng.uniform(0, extent), rng.uniform(2, extent / 2),
             rng.uniform(2, extent / 2)};
}

// Cell-count oracle on a grid of side `step`.
double raster_iou(const Box& a, const Box& b, double step) {
  const double x0 = std::min(a.left(), b.left()), x1 = std::max(a.right(), b.right());
  const double y0 = std::min(a.top(), b.top()), y1 = std::max(a.bottom(), b.bottom());
  std::size_t inter = 0, uni = 0;
  for (double y = y0 + step / 2; y < y1; y += step) {
    for (double x = x0 + step / 2; x < x1; x += step) {
      const bool in_a = x >= a.left() && x < a.right() && y >= a.top() && y < a.bottom();
      const bool in_b = x >= b.left() && x < b.right() && y >= b.top() && y < b.bottom();
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

TEST(Backbone, DeskAndVggShapes) {
  EXPECT_EQ(BackboneConfig::desk().feature_shape(), (Shape{32, 16, 16}));
  EXPECT_EQ(BackboneConfig::desk().stride(), 4u);
  BackboneConfig vgg = BackboneConfig::vgg16();
  vgg.input_h = vgg.input_w = 224;
  EXPECT_EQ(vgg.feature_shape(), (Shape{512, 14, 14}));
  EXPECT_EQ(vgg.stride(), 16u);
  EXPECT_EQ(vgg.conv_layers(), 13u);
}

TEST(Backbone, ExtractFeaturesShapeAndZeroCase) {
  Rng rng(1);
  Backbone bb(BackboneConfig::desk(), rng);
  for (const NamedTensor& p : testing::items(bb.params())) {
    if (p.name.ends_with("bias")) std::fill(p.tensor.data().begin(), p.tensor.data().end(), 0.0);
  }
  Tape tape(false);
  FeatureMap fm = bb.extract_features(tape, Tensor::zeros({3, 64, 64}));
  EXPECT_EQ(fm.features.shape(), (Shape{32, 16, 16}));
  EXPECT_EQ(fm.stride, 4u);
  for (double v : fm.features.data()) EXPECT_EQ(v, 0.0);
}

TEST(Backbone, IndivisibleInputRejected) {
  Rng rng(1);
  Backbone bb(BackboneConfig::desk(), rng);
  Tape tape(false);
  EXPECT_THROW(bb.extract_features(tape, Tensor::zeros({3, 62, 64})), std::invalid_argument);
}

TEST(MultiCnn, ZeroHeadGivesHalfAndLossIsLn2) {
  Rng rng(2);
  MultiCnn m(BackboneConfig::desk(), 12, rng);
  std::fill(m.fc_weight().data().begin(), m.fc_weight().data().end(), 0.0);
  std::fill(m.fc_bias().data().begin(), m.fc_bias().data().end(), 0.0);
  Tape tape(false);
  Rng img(3);
  Tensor s = m.forward(tape, random_tensor({3, 64, 64}, img, 0, 1, false));
  ASSERT_EQ(s.size(), 12u);
  for (double v : s.data()) EXPECT_EQ(v, 0.5);
  std::vector<double> truth(12, 0.0);
  truth[3] = truth[7] = 1.0;
  EXPECT_NEAR(multi_cnn_loss(tape, s, truth).item(), std::log(2.0), 1e-12);
}

TEST(MultiCnn, DeterministicAndPerfectLimit) {
  Rng rng(4);
  MultiCnn m(BackboneConfig::desk(), 5, rng);
  Rng img(5);
  Tensor x = random_tensor({3, 64, 64}, img, 0, 1, false);
  Tape tape(false);
  EXPECT_EQ(values(m.forward(tape, x)), values(m.forward(tape, x)));
  const std::vector<double> y = {1, 0, 0, 1, 0};
  const double loss = multi_cnn_loss(tape, Tensor::from({5}, y), y).item();
  EXPECT_GE(loss, 0.0);
  EXPECT_LT(loss, 1e-6);
  const std::vector<double> short_truth = {1, 0};
  EXPECT_THROW(multi_cnn_loss(tape, Tensor::from({5}, y), short_truth), std::invalid_argument);
}

TEST(MultiCnn, LossGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Tensor p = random_tensor({12}, rng, 0.05, 0.95);
    std::vector<double> y(12, 0.0);
    y[seed % 12] = y[(seed * 5) % 12] = 1.0;
    EXPECT_LT(grad_check([&](Tape& t) { return multi_cnn_loss(t, p, y); }, p, 1e-6), 1e-6);
  }
}

TEST(MultiCnn, ComposedGradientMatchesFiniteDifferences) {
  BackboneConfig small;
  small.stages = {{4, true}, {4, false}};
  small.input_h = small.input_w = 8;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    MultiCnn m(small, 3, rng);
    Tensor x = random_tensor({3, 8, 8}, rng, 0, 1, false);
    const std::vector<double> y = {1, 0, 1};
    std::vector<Tensor> pts;
    for (const NamedTensor& p : testing::items(m.params())) pts.push_back(p.tensor);
    auto f = [&](Tape& t) { return multi_cnn_loss(t, m.forward(t, x), y); };
    EXPECT_LT(grad_check(f, pts), 1e-4) << "seed " << seed;
  }
}

TEST(Anchors, CentersCountsAndShapes) {
  const std::vector<double> scales = {8, 16, 24, 40}, ratios = {0.5, 1, 2};
  const auto a = generate_anchors(2, 2, 4, scales, ratios);
  ASSERT_EQ(a.size(), 48u);
  std::set<std::pair<double, double>> centers;
  for (const AnchorBox& ab : a) {
    centers.insert({ab.box.x, ab.box.y});
    EXPECT_EQ(ab.box.x, (ab.col + 0.5) * 4);
    EXPECT_EQ(ab.box.y, (ab.row + 0.5) * 4);
    const double s = scales[ab.scale_index], r = ratios[ab.ratio_index];
    EXPECT_NEAR(ab.box.w, s * std::sqrt(r), 1e-12);
    EXPECT_NEAR(ab.box.h, s / std::sqrt(r), 1e-12);
  }
  EXPECT_EQ(centers, (std::set<std::pair<double, double>>{{2, 2}, {6, 2}, {2, 6}, {6, 6}}));
  const std::vector<double> one = {16}, unit = {1};
  const auto sq = generate_anchors(1, 1, 4, one, unit);
  EXPECT_EQ(sq[0].box.w, 16.0);
  EXPECT_EQ(sq[0].box.h, 16.0);
  EXPECT_THROW(generate_anchors(2, 2, 4, {}, ratios), std::invalid_argument);
}

TEST(Deltas, DecodeExamples) {
  const Box a{10, 20, 4, 8};
  EXPECT_EQ(decode_deltas(a, {}), a);
  EXPECT_DOUBLE_EQ(decode_deltas(a, {0.5, 0, 0, 0}).x, 12.0);
  EXPECT_NEAR(decode_deltas(a, {0, 0, std::log(2.0), 0}).w, 8.0, 1e-12);
  const Box huge = decode_deltas(a, {0, 0, 50, -50});
  EXPECT_NEAR(huge.w, 4 * std::exp(kMaxLogScale), 1e-9);
  EXPECT_NEAR(huge.h, 8 * std::exp(-kMaxLogScale), 1e-12);
}

TEST(Deltas, EncodeExamplesAndErrors) {
  const Box a{0, 0, 2, 2};
  EXPECT_EQ(encode_deltas(a, a), BoxDeltas{});
  const BoxDeltas t = encode_deltas(a, {1, 0, 4, 2});
  EXPECT_DOUBLE_EQ(t.tx, 0.5);
  EXPECT_DOUBLE_EQ(t.ty, 0.0);
  EXPECT_NEAR(t.tw, std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(t.th, 0.0);
  EXPECT_THROW(encode_deltas(a, {1, 1, 0, 2}), std::invalid_argument);
}

TEST(Deltas, RoundTrips) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Box a = random_box(rng), g = random_box(rng);
    const Box back = decode_deltas(a, encode_deltas(a, g));
    EXPECT_NEAR(back.x, g.x, 1e-9);
    EXPECT_NEAR(back.y, g.y, 1e-9);
    EXPECT_NEAR(back.w, g.w, 1e-9);
    EXPECT_NEAR(back.h, g.h, 1e-9);
    const BoxDeltas t{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-4, 4),
                      rng.uniform(-4, 4)};
    const BoxDeltas u = encode_deltas(a, decode_deltas(a, t));
    EXPECT_NEAR(u.tx, t.tx, 1e-9);
    EXPECT_NEAR(u.ty, t.ty, 1e-9);
    EXPECT_NEAR(u.tw, t.tw, 1e-9);
    EXPECT_NEAR(u.th, t.th, 1e-9);
  }
}

TEST(SmoothL1, ExamplesAndKnee) {
  EXPECT_DOUBLE_EQ(smooth_l1({0.5, 0, 0, 0}, {}), 0.125);
  EXPECT_DOUBLE_EQ(smooth_l1({0, 2, 0, 0}, {}), 1.5);
  EXPECT_DOUBLE_EQ(smooth_l1({0, 0, 1, 0}, {}), 0.5);
  for (double sign : {-1.0, 1.0}) {
    const double e = 1e-9;
    EXPECT_NEAR(ops::smooth_l1_value(sign * (1 - e)), 0.5, 1e-8);
    EXPECT_NEAR(ops::smooth_l1_value(sign * (1 + e)), 0.5, 1e-8);
    EXPECT_NEAR(ops::smooth_l1_derivative(sign * (1 - e)), sign, 1e-8);
    EXPECT_NEAR(ops::smooth_l1_derivative(sign * (1 + e)), sign, 1e-8);
    EXPECT_EQ(ops::smooth_l1_value(sign), 0.5);
    EXPECT_EQ(ops::smooth_l1_derivative(sign), sign);
  }
}

TEST(Iou, ExamplesAndProperties) {
  const Box a{1, 1, 2, 2}, b{2, 1, 2, 2};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, Box{10, 10, 2, 2}), 0.0);
  EXPECT_NEAR(iou(a, b), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(raster_iou(a, b, 0.01), 1.0 / 3.0, 1e-3);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const Box p = random_box(rng), q = random_box(rng);
    const double v = iou(p, q);
    EXPECT_EQ(v, iou(q, p));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    if (!(p == q)) {
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Iou, AgreesWithRasterOracle) {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const Box p{rng.uniform(4, 12), rng.uniform(4, 12), rng.uniform(1, 8), rng.uniform(1, 8)};
    const Box q{rng.uniform(4, 12), rng.uniform(4, 12), rng.uniform(1, 8), rng.uniform(1, 8)};
    EXPECT_NEAR(iou(p, q), raster_iou(p, q, 0.005), 1e-3) << i;
  }
}

TEST(Nms, Examples) {
  const Box a{20, 20, 10, 10};
  std::vector<ScoredBox> same = {{a, 0.9, 0}, {a, 0.8, 1}};
  auto kept = nms_select(same, 5, 0.7, 64, 64);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].source, 0u);
  EXPECT_EQ(kept.back().source, SIZE_MAX);
  EXPECT_EQ(kept.back().confidence, 1.0);
  EXPECT_EQ(kept.back().box, whole_image_box(64, 64));

  std::vector<ScoredBox> disjoint = {{a, 0.4, 0}, {Box{50, 50, 10, 10}, 0.6, 1}};
  kept = nms_select(disjoint, 5, 0.7, 64, 64);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].source, 1u);

  // IoU 0.8: widths 10 vs 12.5 share a center.
  std::vector<ScoredBox> close = {{Box{20, 20, 12.5, 10}, 0.5, 0}, {a, 0.9, 1}};
  ASSERT_NEAR(iou(close[0].box, a), 0.8, 1e-12);
  kept = nms_select(close, 5, 0.7, 64, 64);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].source, 1u);
}

TEST(Nms, PairwiseBoundAndOrder) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ScoredBox> props;
    for (std::size_t i = 0; i < 80; ++i) props.push_back({random_box(rng), rng.uniform(), i});
    const auto kept = nms_select(props, 16, 0.7, 64, 64);
    ASSERT_LE(kept.size(), 17u);
    for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
      if (i + 2 < kept.size()) {
        EXPECT_GE(kept[i].confidence, kept[i + 1].confidence);
      }
      for (std::size_t j = i + 1; j + 1 < kept.size(); ++j) {
        EXPECT_LE(iou(kept[i].box, kept[j].box), 0.7 + 1e-12);
      }
    }
  }
}

FeatureMap constant_map(std::size_t c, std::size_t h, std::size_t w, double v,
                        std::size_t stride) {
  return FeatureMap{Tensor::full({c, h, w}, v), h * stride, w * stride, stride};
}

TEST(Bilinear, PartitionOfUnity) {
  Rng rng(11);
  const FeatureMap fm = constant_map(3, 16, 16, 5.0, 4);
  Tape tape(false);
  for (int i = 0; i < 200; ++i) {
    const Box b = clip_box(random_box(rng), 64, 64);
    Tensor out = bilinear_sample(tape, fm, Tensor::from({4}, {b.x, b.y, b.w, b.h}));
    ASSERT_EQ(out.shape(), (Shape{3, 7, 7}));
    for (double v : out.data()) EXPECT_NEAR(v, 5.0, 1e-6);
  }
}

TEST(Bilinear, GridPointAndHandComputedCenter) {
  Tape tape(false);
  // Feature cell (i, j) sits at pixel ((j + 0.5) s, (i + 0.5) s).
  FeatureMap fm{Tensor::from({1, 2, 2}, {0, 1, 0, 1}), 2, 2, 1};
  Tensor c = bilinear_sample(tape, fm, Tensor::from({4}, {1, 1, 2, 2}), 1, 1);
  EXPECT_NEAR(c.item(), 0.5, 1e-12);
  Rng rng(12);
  FeatureMap r{random_tensor({1, 4, 4}, rng, -1, 1, false), 16, 16, 4};
  // Single sample at pixel (10, 6) -> feature (2, 1).
  Tensor g = bilinear_sample(tape, r, Tensor::from({4}, {10, 6, 2, 2}), 1, 1);
  EXPECT_NEAR(g.item(), r.features.at(1 * 4 + 2), 1e-12);
}

TEST(Bilinear, DegenerateBoxRejected) {
  Tape tape(false);
  const FeatureMap fm = constant_map(1, 4, 4, 1.0, 4);
  EXPECT_THROW(bilinear_sample(tape, fm, Tensor::from({4}, {8, 8, 0, 4})),
               std::invalid_argument);
}

TEST(Bilinear, GradientsReachFeaturesAndBox) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    FeatureMap fm{random_tensor({2, 6, 6}, rng), 24, 24, 4};
    // Keep samples away from integer feature coordinates where the blend kinks.
    Tensor box = Tensor::from({4}, {11.3 + 0.1 * seed, 12.1, 9.7, 10.9}, true);
    auto f = [&](Tape& t) {
      Rng w(seed + 50);
      Tensor s = bilinear_sample(t, fm, box, 3, 3);
      return ops::sum(t, ops::mul(t, s, random_tensor(s.shape(), w, -1, 1, false)));
    };
    EXPECT_LT(grad_check(f, {fm.features, box}, 1e-6), 1e-4) << "seed " << seed;
  }
}

TEST(Cluster, Examples) {
  const std::vector<Box> one = {{10, 10, 4, 4}};
  EXPECT_EQ(cluster_merge_boxes(one, 10), one);
  const std::vector<Box> two = {{10, 10, 4, 4}, {12, 10, 6, 2}};
  const auto merged = cluster_merge_boxes(two, 10);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0], Box::from_corners(8, 8, 15, 12));
  const std::vector<Box> three = {{0, 0, 2, 2}, {3, 0, 2, 2}, {50, 0, 2, 2}};
  EXPECT_EQ(cluster_merge_boxes(three, 10).size(), 2u);
}

TEST(Cluster, RegionsContainMembers) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Box> boxes;
    for (int i = 0; i < 6; ++i) boxes.push_back(random_box(rng));
    const auto regions = cluster_merge_boxes(boxes, 20);
    ASSERT_GE(regions.size(), 1u);
    for (const Box& b : boxes) {
      bool inside = false;
      for (const Box& r : regions) inside = inside || r.contains(b);
      EXPECT_TRUE(inside);
    }
  }
}

Localizer small_localizer(Rng& rng) {
  LocalizerConfig cfg;
  cfg.backbone.stages = {{4, true}, {4, false}};
  cfg.backbone.input_h = cfg.backbone.input_w = 16;
  cfg.head_channels = 6;
  cfg.anchors.scales = {6, 12};
  cfg.anchors.ratios = {1, 2};
  return Localizer(cfg, rng);
}

TEST(ScoreAnchors, ZeroOutputLayerAndChannelCount) {
  Rng rng(14);
  Localizer loc(LocalizerConfig{}, rng);
  const ParamSet p = loc.params();
  for (const char* name : {"head.out.weight", "head.out.bias"}) {
    auto d = p.find(name)->data();
    std::fill(d.begin(), d.end(), 0.0);
  }
  Tape tape(false);
  const auto out = loc.forward(tape, random_tensor({3, 64, 64}, rng, 0, 1, false));
  EXPECT_EQ(out.scores.raw().dim(0), 5 * 12u);
  for (std::size_t a = 0; a < out.scores.count(); ++a) {
    EXPECT_EQ(out.scores.deltas(a), BoxDeltas{});
    EXPECT_EQ(out.scores.confidence(a), 0.5);
  }
  FeatureMap wrong{Tensor::zeros({8, 16, 16}), 64, 64, 4};
  EXPECT_THROW(loc.score_anchors(tape, wrong), std::invalid_argument);
}

TEST(ScoreAnchors, HeadGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Localizer loc = small_localizer(rng);
    FeatureMap fm{random_tensor({4, 4, 4}, rng, 0, 1, false), 16, 16, 4};
    std::vector<Tensor> pts;
    for (const NamedTensor& p : testing::items(loc.params())) {
      if (p.name.starts_with("head.")) pts.push_back(p.tensor);
    }
    auto f = [&](Tape& t) {
      Rng w(seed);
      const Tensor raw = loc.score_anchors(t, fm).raw();
      return ops::sum(t, ops::mul(t, raw, random_tensor(raw.shape(), w, -1, 1, false)));
    };
    EXPECT_LT(grad_check(f, pts), 1e-4);
  }
}

TEST(SampleMinibatch, ConfidenceMode) {
  Rng rng(15);
  std::vector<AnchorBox> anchors(100);
  std::vector<double> conf(100);
  for (std::size_t i = 0; i < 100; ++i) conf[i] = static_cast<double>((i * 37) % 100);
  const auto b = sample_minibatch(anchors, conf, 8, SampleMode::kConfidence, {}, rng);
  std::set<double> pos, neg;
  for (auto i : b.positives) pos.insert(conf[i]);
  for (auto i : b.negatives) neg.insert(conf[i]);
  EXPECT_EQ(pos, (std::set<double>{96, 97, 98, 99}));
  EXPECT_EQ(neg, (std::set<double>{0, 1, 2, 3}));
}

TEST(SampleMinibatch, IouModeThresholdsAndCaps) {
  Rng rng(16);
  const Box gt{20, 20, 10, 10};
  std::vector<AnchorBox> anchors;
  anchors.push_back({Box{20, 20, 10, 10}});        // IoU 1
  anchors.push_back({Box{20, 20, 10, 12.5}});      // IoU 0.8
  anchors.push_back({Box{20, 20, 10, 20}});        // IoU 0.5
  for (int i = 0; i < 20; ++i) anchors.push_back({Box{50.0 + i * 0.1, 50, 4, 4}});
  const std::vector<Box> gts = {gt};
  const auto b = sample_minibatch(anchors, {}, 8, SampleMode::kIou,
                                  std::span<const Box>(gts), rng);
  EXPECT_EQ(std::set<std::size_t>(b.positives.begin(), b.positives.end()),
            (std::set<std::size_t>{0, 1}));
  EXPECT_EQ(b.negatives.size(), 4u);
  for (auto i : b.negatives) EXPECT_GE(i, 3u);
  EXPECT_EQ(b.matched, (std::vector<std::size_t>{0, 0}));
}

TEST(SampleMinibatch, InvariantsAndErrors) {
  Rng rng(17);
  const auto anchors = generate_anchors(16, 16, 4, std::vector<double>{8, 16, 24, 40},
                                        std::vector<double>{0.5, 1, 2});
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Box> gt = {random_box(rng), random_box(rng)};
    const auto b = sample_minibatch(anchors, {}, 32, SampleMode::kIou,
                                    std::span<const Box>(gt), rng);
    EXPECT_LE(b.positives.size(), 16u);
    EXPECT_LE(b.negatives.size(), 16u);
    std::set<std::size_t> p(b.positives.begin(), b.positives.end());
    for (auto n : b.negatives) EXPECT_EQ(p.count(n), 0u);
  }
  EXPECT_THROW(sample_minibatch(anchors, {}, 7, SampleMode::kIou, {}, rng),
               std::invalid_argument);
  std::vector<AnchorBox> few(4);
  std::vector<double> c(4, 0.0);
  EXPECT_THROW(sample_minibatch(few, c, 6, SampleMode::kConfidence, {}, rng),
               std::invalid_argument);
  EXPECT_THROW(sample_minibatch(anchors, {}, 8, SampleMode::kIou, std::nullopt, rng),
               std::invalid_argument);
}

TEST(LocalizationLoss, GradientMatchesFiniteDifferences) {
  const auto anchors = generate_anchors(4, 4, 4, std::vector<double>{6, 12},
                                        std::vector<double>{1, 2});
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Tensor raw = random_tensor({20, 4, 4}, rng, -1.5, 1.5);
    const AnchorScores scores(raw, 4);
    std::vector<Box> gt = {Box{5, 6, 7, 6}, Box{11, 10, 6, 9}};
    const auto batch = sample_minibatch(anchors, {}, 8, SampleMode::kIou,
                                        std::span<const Box>(gt), rng);
    ASSERT_FALSE(batch.positives.empty());
    auto f = [&](Tape& t) { return localization_loss(t, scores, anchors, batch, gt); };
    EXPECT_LT(grad_check(f, raw), 1e-4) << "seed " << seed;
  }
}

TEST(LocalizationLoss, PerfectAndZeroDeltaCases) {
  // One cell, two anchors; raw scores set by hand.
  const std::vector<AnchorBox> anchors = {{Box{8, 8, 8, 8}}, {Box{8, 8, 16, 16}}};
  Tensor raw = Tensor::zeros({10, 1, 1}, true);
  AnchorScores scores(raw, 2);
  SampledBatch batch;
  batch.positives = {0};
  batch.negatives = {1};
  batch.matched = {0};
  batch.m = 2;
  const std::vector<Box> gt = {anchors[0].box};
  Tape tape(false);
  // Zero deltas with gt = anchor: only the confidence term, ln 2.
  EXPECT_NEAR(localization_loss(tape, scores, anchors, batch, gt).item(), std::log(2.0),
              1e-12);
  raw.data()[scores.flat_index(0, 4)] = 40.0;
  raw.data()[scores.flat_index(1, 4)] = -40.0;
  EXPECT_LT(localization_loss(tape, scores, anchors, batch, gt).item(), 1e-6);
}

TEST(RegionEncoder, ZeroPatchAndDeterminism) {
  Rng rng(18);
  RegionEncoder enc(RegionEncoderConfig{}, rng);
  for (const NamedTensor& p : testing::items(enc.params())) {
    if (p.name.ends_with("bias")) std::fill(p.tensor.data().begin(), p.tensor.data().end(), 0.0);
  }
  Tape tape(false);
  Tensor v = enc.encode(tape, Tensor::zeros({32, 7, 7}), ops::Mode::kEval, rng);
  ASSERT_EQ(v.size(), 256u);
  for (double x : v.data()) EXPECT_EQ(x, 0.0);
  Tensor patch = random_tensor({32, 7, 7}, rng, -1, 1, false);
  Rng a(1), b(2);
  EXPECT_EQ(values(enc.encode(tape, patch, ops::Mode::kEval, a)),
            values(enc.encode(tape, patch, ops::Mode::kEval, b)));
  EXPECT_THROW(enc.encode(tape, Tensor::zeros({16, 7, 7}), ops::Mode::kEval, rng),
               std::invalid_argument);
}

TEST(RegionEncoder, BatchRowsMatchSingleEncodes) {
  Rng rng(19);
  RegionEncoderConfig cfg;
  cfg.channels = 2;
  cfg.grid = 3;
  cfg.hidden = 5;
  cfg.output = 4;
  RegionEncoder enc(cfg, rng);
  Tensor batch = random_tensor({3, 18}, rng, -1, 1, false);
  Tape tape(false);
  Tensor v = enc.encode_batch(tape, batch, ops::Mode::kEval, rng);
  ASSERT_EQ(v.shape(), (Shape{3, 4}));
  for (std::size_t r = 0; r < 3; ++r) {
    Tensor one = Tensor::from({2, 3, 3}, {batch.data().begin() + 18 * r,
                                          batch.data().begin() + 18 * (r + 1)});
    Tensor e = enc.encode(tape, one, ops::Mode::kEval, rng);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(v.at(r * 4 + j), e.at(j), 1e-12);
  }
}

TEST(RegionEncoder, GradientMatchesFiniteDifferences) {
  RegionEncoderConfig cfg;
  cfg.channels = 2;
  cfg.grid = 3;
  cfg.hidden = 6;
  cfg.output = 5;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    RegionEncoder enc(cfg, rng);
    for (const NamedTensor& p : testing::items(enc.params())) {
      if (p.name.ends_with("bias")) {
        for (double& b : p.tensor.data()) b = rng.uniform(0.05, 0.3);
      }
    }
    Tensor patch = random_tensor({2, 3, 3}, rng);
    std::vector<Tensor> pts = {patch};
    for (const NamedTensor& p : testing::items(enc.params())) pts.push_back(p.tensor);
    auto f = [&](Tape& t) {
      Rng d(seed + 7);
      Tensor v = enc.encode(t, patch, ops::Mode::kTrain, d);
      Rng w(seed);
      return ops::sum(t, ops::mul(t, v, random_tensor(v.shape(), w, -1, 1, false)));
    };
    EXPECT_LT(grad_check(f, pts), 1e-4) << "seed " << seed;
  }
}

}  // namespace
}  // namespace rlsd
