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

// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all
// selected criteria pass.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rlsd/backbone.hpp"
#include "rlsd/cli.hpp"
#include "rlsd/fusion.hpp"
#include "rlsd/geometry.hpp"
#include "rlsd/grad_check.hpp"
#include "rlsd/label_rnn.hpp"
#include "rlsd/localizer.hpp"
#include "rlsd/metrics.hpp"
#include "rlsd/ops.hpp"
#include "rlsd/region_encoder.hpp"
#include "rlsd/synthdata.hpp"
#include "rlsd/trainer.hpp"

namespace rlsd {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor rand_t(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
              bool track = true) {
  Tensor t = Tensor::zeros(std::move(shape), track);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Keeps values at least `gap` away from zero so ReLU kinks stay out of reach
// of the finite-difference stencil.
Tensor rand_away(Shape shape, Rng& rng, double gap) {
  Tensor t = rand_t(std::move(shape), rng);
  for (double& v : t.data()) v = v < 0 ? v - gap : v + gap;
  return t;
}

// Scalar probe: fixed random weights dotted with `y`.
Tensor probe(Tape& t, const Tensor& y, std::uint64_t seed) {
  Rng w(seed + 1000);
  return ops::sum(t, ops::mul(t, y, rand_t(y.shape(), w, -1, 1, false)));
}

std::vector<Tensor> param_tensors(const ParamSet& p) {
  std::vector<Tensor> out;
  for (const NamedTensor& nt : p.items()) out.push_back(nt.tensor);
  return out;
}

// ---- criterion 1 ----

struct GradCase {
  std::string name;
  // Builds the function and its points for one random instance.
  std::function<double(std::uint64_t)> run;
};

std::vector<GradCase> grad_cases() {
  std::vector<GradCase> c;
  auto unary = [&c](std::string name, std::function<Tensor(Tape&, const Tensor&)> op,
                    Shape shape, double gap = 0.0) {
    c.push_back({name, [op, shape, gap](std::uint64_t s) {
                   Rng rng(s);
                   Tensor x = gap > 0 ? rand_away(shape, rng, gap) : rand_t(shape, rng);
                   return grad_check([&](Tape& t) { return probe(t, op(t, x), s); }, x);
                 }});
  };
  c.push_back({"conv2d", [](std::uint64_t s) {
                 Rng rng(s);
                 Tensor x = rand_t({2, 5, 5}, rng), k = rand_t({3, 2, 3, 3}, rng),
                        b = rand_t({3}, rng);
                 return grad_check(
                     [&](Tape& t) { return probe(t, ops::conv2d(t, x, k, b), s); },
                     {x, k, b});
               }});
  unary("max_pool2d", ops::max_pool2d, {2, 4, 6});
  c.push_back({"linear", [](std::uint64_t s) {
                 Rng rng(s);
                 Tensor x = rand_t({4}, rng), w = rand_t({3, 4}, rng), b = rand_t({3}, rng);
                 return grad_check(
                     [&](Tape& t) { return probe(t, ops::linear(t, x, w, b), s); }, {x, w, b});
               }});
  c.push_back({"linear-batched", [](std::uint64_t s) {
                 Rng rng(s);
                 Tensor x = rand_t({5, 4}, rng), w = rand_t({3, 4}, rng), b = rand_t({3}, rng);
                 return grad_check(
                     [&](Tape& t) { return probe(t, ops::linear(t, x, w, b), s); }, {x, w, b});
               }});
  unary("relu", ops::relu, {7}, 0.05);
  unary("sigmoid", ops::sigmoid, {7});
  unary("tanh", ops::tanh, {7});
  unary("softmax", ops::softmax, {6});
  unary("softmax-rows", ops::softmax, {3, 4});
  c.push_back({"dropout", [](std::uint64_t s) {
                 Rng rng(s);
                 Tensor x = rand_t({12}, rng);
                 return grad_check([&](Tape& t) {
                   Rng d(s + 7);
                   return probe(t, ops::dropout(t, x, 0.3, ops::Mode::kTrain, d), s);
                 }, x);
               }});
  auto binary = [&c](std::string name,
                     std::function<Tensor(Tape&, const Tensor&, const Tensor&)> op) {
    c.push_back({name, [op](std::uint64_t s) {
                   Rng rng(s);
                   Tensor a = rand_t({6}, rng), b = rand_t({6}, rng);
                   return grad_check([&](Tape& t) { return probe(t, op(t, a, b), s); },
                                     {a, b});
                 }});
  };
  binary("add", ops::add);
  binary("sub", ops::sub);
  binary("mul", ops::mul);
  unary("scale", [](Tape& t, const Tensor& x) { return ops::scale(t, x, -1.7); }, {5});
  unary("square", ops::square, {5});
  unary("sum", [](Tape& t, const Tensor& x) { return ops::sum(t, x); }, {5});
  unary("mean", [](Tape& t, const Tensor& x) { return ops::mean(t, x); }, {5});
  unary("reshape", [](Tape& t, const Tensor& x) { return ops::reshape(t, x, {3, 2}); },
        {6});
  unary("gather", [](Tape& t, const Tensor& x) {
    const std::vector<std::size_t> idx = {4, 0, 4, 2};
    return ops::gather(t, x, idx);
  }, {5});
  binary("concat", [](Tape& t, const Tensor& a, const Tensor& b) {
    const std::vector<Tensor> parts = {a, b};
    return ops::concat(t, parts);
  });
  unary("global_avg_pool", ops::global_avg_pool, {3, 4, 4});
  c.push_back({"binary_cross_entropy", [](std::uint64_t s) {
                 Rng rng(s);
                 Tensor p = rand_t({6}, rng, 0.05, 0.95);
                 const std::vector<double> y = {1, 0, 0, 1, 1, 0};
                 return grad_check(
                     [&](Tape& t) { return ops::binary_cross_entropy(t, p, y); }, p, 1e-6);
               }});
  c.push_back({"smooth_l1", [](std::uint64_t s) {
                 Rng rng(s);
                 Tensor p = rand_t({8}, rng, -3, 3);
                 std::vector<double> y(8);
                 for (std::size_t i = 0; i < 8; ++i) {
                   // |p - y| kept away from the knee at 1.
                   const double d = rng.uniform(0.1, 0.8) + (i % 2 ? 1.1 : 0.0);
                   y[i] = p.data()[i] - (i % 4 < 2 ? d : -d);
                 }
                 return grad_check([&](Tape& t) { return ops::smooth_l1(t, p, y); }, p);
               }});
  c.push_back({"elementwise_max", [](std::uint64_t s) {
                 Rng rng(s);
                 std::vector<Tensor> in = {rand_t({5}, rng), rand_t({5}, rng),
                                           rand_t({5}, rng)};
                 return grad_check(
                     [&](Tape& t) { return probe(t, ops::elementwise_max(t, in, 5), s); },
                     in);
               }});
  c.push_back({"bilinear_sample", [](std::uint64_t s) {
                 Rng rng(s);
                 FeatureMap fm{rand_t({2, 6, 6}, rng), 24, 24, 4};
                 Tensor box = Tensor::from({4}, {11.3 + 0.1 * static_cast<double>(s), 12.1,
                                                 9.7, 10.9}, true);
                 return grad_check(
                     [&](Tape& t) { return probe(t, bilinear_sample(t, fm, box, 3, 3), s); },
                     {fm.features, box}, 1e-6);
               }});
  c.push_back({"region-encoder", [](std::uint64_t s) {
                 Rng rng(s);
                 RegionEncoderConfig cfg;
                 cfg.channels = 2;
                 cfg.grid = 3;
                 cfg.hidden = 6;
                 cfg.output = 5;
                 RegionEncoder enc(cfg, rng);
                 const ParamSet ps = enc.params();
                 for (const NamedTensor& p : ps.items()) {
                   if (p.name.ends_with("bias")) {
                     for (double& b : p.tensor.data()) b = rng.uniform(0.05, 0.3);
                   }
                 }
                 Tensor patch = rand_t({2, 3, 3}, rng);
                 std::vector<Tensor> pts = param_tensors(enc.params());
                 pts.push_back(patch);
                 return grad_check([&](Tape& t) {
                   Rng d(s + 7);
                   return probe(t, enc.encode(t, patch, ops::Mode::kTrain, d), s);
                 }, pts);
               }});
  // Composite heads.
  c.push_back({"multi-cnn loss", [](std::uint64_t s) {
                 BackboneConfig small;
                 small.stages = {{4, true}, {4, false}};
                 small.input_h = small.input_w = 8;
                 Rng rng(s);
                 MultiCnn m(small, 3, rng);
                 Tensor x = rand_t({3, 8, 8}, rng, 0, 1, false);
                 const std::vector<double> y = {1, 0, 1};
                 return grad_check(
                     [&](Tape& t) { return multi_cnn_loss(t, m.forward(t, x), y); },
                     param_tensors(m.params()));
               }});
  c.push_back({"localization_loss", [](std::uint64_t s) {
                 const auto anchors = generate_anchors(4, 4, 4, std::vector<double>{6, 12},
                                                       std::vector<double>{1, 2});
                 Rng rng(s);
                 Tensor raw = rand_t({20, 4, 4}, rng, -1.5, 1.5);
                 const AnchorScores scores(raw, 4);
                 const std::vector<Box> gt = {Box{5, 6, 7, 6}, Box{11, 10, 6, 9}};
                 const auto batch = sample_minibatch(anchors, {}, 8, SampleMode::kIou,
                                                     std::span<const Box>(gt), rng);
                 return grad_check(
                     [&](Tape& t) { return localization_loss(t, scores, anchors, batch, gt); },
                     raw);
               }});
  c.push_back({"anchor-score head", [](std::uint64_t s) {
                 Rng rng(s);
                 LocalizerConfig cfg;
                 cfg.backbone.stages = {{4, true}, {4, true}};
                 cfg.backbone.input_h = cfg.backbone.input_w = 16;
                 cfg.head_channels = 6;
                 Localizer loc(cfg, rng);
                 const ParamSet ps = loc.params();
                 for (const NamedTensor& p : ps.items()) {
                   for (double& v : p.tensor.data()) v = rng.uniform(-0.5, 0.5);
                 }
                 FeatureMap fm{rand_t({4, 4, 4}, rng, 0, 1, false), 16, 16, 4};
                 std::vector<Tensor> pts;
                 for (const NamedTensor& p : ps.items()) {
                   if (p.name.starts_with("head.")) pts.push_back(p.tensor);
                 }
                 return grad_check(
                     [&](Tape& t) { return probe(t, loc.score_anchors(t, fm).raw(), s); },
                     pts);
               }});
  auto lstm_cfg = [] {
    LstmConfig cfg;
    cfg.num_labels = 4;
    cfg.embed = 5;
    cfg.hidden = 6;
    cfg.feature = 7;
    return cfg;
  };
  c.push_back({"lstm step", [lstm_cfg](std::uint64_t s) {
                 Rng rng(s);
                 LabelLstm lstm(lstm_cfg(), rng);
                 const ParamSet ps = lstm.params();
                 for (const NamedTensor& p : ps.items()) {
                   for (double& v : p.tensor.data()) v = rng.uniform(-0.8, 0.8);
                 }
                 Tensor x = rand_t({5}, rng);
                 LstmState st{rand_t({6}, rng), rand_t({6}, rng)};
                 std::vector<Tensor> pts = param_tensors(lstm.params());
                 pts.insert(pts.end(), {x, st.h, st.c});
                 return grad_check([&](Tape& t) {
                   const LstmStep o = lstm.step(t, x, st);
                   return ops::add(t, probe(t, o.probs, s),
                                   ops::add(t, probe(t, o.state.h, s + 1),
                                            probe(t, o.state.c, s + 2)));
                 }, pts);
               }});
  c.push_back({"2-step unroll + fusion + loss", [lstm_cfg](std::uint64_t s) {
                 Rng rng(s);
                 LabelLstm lstm(lstm_cfg(), rng);
                 const ParamSet ps = lstm.params();
                 for (const NamedTensor& p : ps.items()) {
                   for (double& v : p.tensor.data()) v = rng.uniform(-0.8, 0.8);
                 }
                 // END strongly suppressed so both steps are emitted.
                 ps.find("b_out")->data()[lstm.end_index()] = -5.0;
                 Tensor feats = rand_t({3, 7}, rng);
                 std::vector<Tensor> pts = param_tensors(lstm.params());
                 pts.push_back(feats);
                 const std::vector<double> y = {1, 0, 0, 1};
                 return grad_check([&](Tape& t) {
                   const RegionUnroll u = lstm.unroll_regions(t, feats, 2);
                   return fusion_loss(t, max_pool_fusion(t, u, lstm.num_labels()), y);
                 }, pts);
               }});
  return c;
}

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  double worst = 0.0;
  std::string worst_name;
  std::size_t cases = 0;
  for (const GradCase& gc : grad_cases()) {
    ++cases;
    for (std::uint64_t s = 1; s <= 5; ++s) {
      double err = 0.0;
      try {
        err = gc.run(s);
      } catch (const std::exception& e) {
        o.pass = false;
        o.detail += gc.name + " threw: " + e.what() + "; ";
        continue;
      }
      if (!(err < 1e-4)) {
        o.pass = false;
        o.detail += gc.name + " seed " + std::to_string(s) + fmt(" err %.3g; ", err);
      }
      if (err > worst) {
        worst = err;
        worst_name = gc.name;
      }
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 120.0) {
    o.pass = false;
    o.detail += "runtime over 2 min; ";
  }
  o.detail += std::to_string(cases) + " checks x 5 instances, max rel err " +
              fmt("%.2e", worst) + " (" + worst_name + "), " + fmt("%.1fs", secs);
  return o;
}

// ---- criterion 2 ----

// Pixel-center rasterization on a uniform grid of pitch `step`. Rectangles
// are axis-aligned, so the 2-D cell counts factor into 1-D counts.
std::size_t raster_cells(double lo, double hi, double origin, double step) {
  if (hi <= lo) return 0;
  const double first = std::ceil((lo - origin) / step - 0.5);
  const double last = std::ceil((hi - origin) / step - 0.5) - 1.0;
  return last >= first ? static_cast<std::size_t>(last - first + 1.0) : 0;
}

double raster_iou(const Box& a, const Box& b, double step) {
  const double ox = std::min(a.left(), b.left()), oy = std::min(a.top(), b.top());
  auto cells = [&](double x0, double x1, double y0, double y1) {
    return static_cast<double>(raster_cells(x0, x1, ox, step)) *
           static_cast<double>(raster_cells(y0, y1, oy, step));
  };
  const double ia = cells(a.left(), a.right(), a.top(), a.bottom());
  const double ib = cells(b.left(), b.right(), b.top(), b.bottom());
  const double both = cells(std::max(a.left(), b.left()), std::min(a.right(), b.right()),
                            std::max(a.top(), b.top()), std::min(a.bottom(), b.bottom()));
  const double uni = ia + ib - both;
  return uni > 0 ? both / uni : 0.0;
}

Outcome criterion_geometry() {
  Outcome o;
  Rng rng(2);
  auto fail = [&o](const std::string& why) {
    o.pass = false;
    o.detail += why + "; ";
  };
  double rt = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Box anchor{rng.uniform(0, 64), rng.uniform(0, 64), rng.uniform(4, 40),
                     rng.uniform(4, 40)};
    const Box target{rng.uniform(0, 64), rng.uniform(0, 64), rng.uniform(2, 50),
                     rng.uniform(2, 50)};
    const Box back = decode_deltas(anchor, encode_deltas(anchor, target));
    rt = std::max({rt, std::abs(back.x - target.x), std::abs(back.y - target.y),
                   std::abs(back.w - target.w), std::abs(back.h - target.h)});
    const BoxDeltas t{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-2, 2),
                      rng.uniform(-2, 2)};
    const BoxDeltas u = encode_deltas(anchor, decode_deltas(anchor, t));
    rt = std::max({rt, std::abs(u.tx - t.tx), std::abs(u.ty - t.ty),
                   std::abs(u.tw - t.tw), std::abs(u.th - t.th)});
  }
  if (!(rt <= 1e-9)) fail("delta round trip error " + fmt("%.3g", rt));

  double c1 = 0.0;
  for (double knee : {-1.0, 1.0}) {
    for (double eps : {1e-6, 1e-9}) {
      c1 = std::max(c1, std::abs(ops::smooth_l1_value(knee - eps) -
                                 ops::smooth_l1_value(knee + eps)));
      c1 = std::max(c1, std::abs(ops::smooth_l1_derivative(knee - eps) -
                                 ops::smooth_l1_derivative(knee + eps)));
    }
  }
  if (!(c1 < 1e-5)) fail("smooth-L1 jump at knee " + fmt("%.3g", c1));

  double nms_worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ScoredBox> props;
    for (std::size_t i = 0; i < 60; ++i) {
      props.push_back({Box{rng.uniform(8, 56), rng.uniform(8, 56), rng.uniform(4, 30),
                           rng.uniform(4, 30)},
                       rng.uniform(), i});
    }
    const double thr = rng.uniform(0.3, 0.8);
    const auto kept = nms_select(props, 16, thr, 64, 64);
    for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
      for (std::size_t j = i + 1; j + 1 < kept.size(); ++j) {
        const double v = iou(kept[i].box, kept[j].box) - thr;
        nms_worst = std::max(nms_worst, v);
      }
    }
  }
  if (nms_worst > 0.0) fail("NMS pair above threshold by " + fmt("%.3g", nms_worst));

  double pou = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const double c = rng.uniform(-3, 3);
    FeatureMap fm{Tensor::full({2, 8, 8}, c), 32, 32, 4};
    const Tensor box = Tensor::from({4}, {rng.uniform(2, 30), rng.uniform(2, 30),
                                          rng.uniform(1, 40), rng.uniform(1, 40)});
    Tape tape(false);
    const Tensor out = bilinear_sample(tape, fm, box);
    for (double v : out.data()) pou = std::max(pou, std::abs(v - c));
  }
  if (!(pou <= 1e-6)) fail("bilinear constant-map error " + fmt("%.3g", pou));

  double iou_worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Box a{rng.uniform(4, 12), rng.uniform(4, 12), rng.uniform(1, 8), rng.uniform(1, 8)};
    const Box b{rng.uniform(4, 12), rng.uniform(4, 12), rng.uniform(1, 8), rng.uniform(1, 8)};
    iou_worst = std::max(iou_worst, std::abs(iou(a, b) - raster_iou(a, b, 1e-4)));
  }
  if (!(iou_worst <= 1e-3)) fail("IoU vs raster " + fmt("%.3g", iou_worst));

  o.detail += "round trip " + fmt("%.1e", rt) + ", knee jump " + fmt("%.1e", c1) +
              ", NMS excess " + fmt("%.1e", nms_worst) + ", bilinear " + fmt("%.1e", pou) +
              ", IoU oracle " + fmt("%.1e", iou_worst);
  return o;
}

// ---- criterion 3 ----

std::set<std::size_t> oracle_predict(const std::vector<double>& s, std::size_t k,
                                     double threshold) {
  std::set<std::size_t> out;
  for (std::size_t l = 0; l < s.size(); ++l) {
    std::size_t above = 0;
    for (std::size_t o = 0; o < s.size(); ++o) {
      if (s[o] > s[l] || (s[o] == s[l] && o < l)) ++above;
    }
    if (above < k && s[l] > threshold) out.insert(l);
  }
  return out;
}

std::optional<double> oracle_ap(const std::vector<RankedItem>& items,
                                std::optional<std::size_t> limit) {
  const std::size_t n = items.size();
  std::vector<std::size_t> rank(n);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t before = 0;
    for (std::size_t o = 0; o < n; ++o) {
      if (items[o].score > items[i].score ||
          (items[o].score == items[i].score && items[o].id < items[i].id)) {
        ++before;
      }
    }
    rank[i] = before + 1;
    positives += items[i].positive;
  }
  if (positives == 0) return std::nullopt;
  const std::size_t depth = limit ? std::min(n, *limit) : n;
  if (limit) positives = std::min(positives, *limit);
  double sum = 0.0;
  for (std::size_t r = 1; r <= depth; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      if (rank[i] != r || !items[i].positive) continue;
      std::size_t hits = 0;
      for (std::size_t o = 0; o < n; ++o) hits += items[o].positive && rank[o] <= r;
      sum += static_cast<double>(hits) / static_cast<double>(r);
    }
  }
  return sum / static_cast<double>(positives);
}

// Returns a description of the first mismatch, or empty.
std::string check_fixture(const std::vector<EvalRecord>& recs, std::size_t l,
                          std::size_t k, double thr, std::size_t cut) {
  std::vector<std::size_t> correct(l), predicted(l), truth(l);
  for (const EvalRecord& r : recs) {
    const auto pred = oracle_predict(r.scores, k, thr);
    const std::set<std::size_t> gt(r.truth.begin(), r.truth.end());
    for (std::size_t j = 0; j < l; ++j) {
      predicted[j] += pred.count(j);
      truth[j] += gt.count(j);
      correct[j] += pred.count(j) && gt.count(j);
    }
  }
  std::size_t sc = 0, sp = 0, sg = 0;
  for (std::size_t j = 0; j < l; ++j) {
    sc += correct[j];
    sp += predicted[j];
    sg += truth[j];
  }
  const OverallPr o = overall_pr(recs, k, thr);
  if (o.precision != (sp ? static_cast<double>(sc) / sp : 0.0)) return "op";
  if (o.recall != (sg ? static_cast<double>(sc) / sg : 0.0)) return "or";
  double cp = 0, cr = 0;
  std::size_t counted = 0;
  for (std::size_t j = 0; j < l; ++j) {
    if (truth[j] == 0) continue;
    cp += predicted[j] ? static_cast<double>(correct[j]) / predicted[j] : 0.0;
    cr += static_cast<double>(correct[j]) / truth[j];
    ++counted;
  }
  const PerClassPr pc = per_class_pr(recs, l, k, thr);
  if (pc.precision != (counted ? cp / counted : 0.0)) return "cp";
  if (pc.recall != (counted ? cr / counted : 0.0)) return "cr";
  const MapResult m = mean_ap(recs, l), mk = map_at_k(recs, l, cut);
  double total = 0, total_k = 0;
  std::size_t with_pos = 0;
  for (std::size_t j = 0; j < l; ++j) {
    std::vector<RankedItem> items;
    for (const EvalRecord& r : recs) {
      items.push_back({r.id, r.scores[j],
                       std::find(r.truth.begin(), r.truth.end(), j) != r.truth.end()});
    }
    const auto want = oracle_ap(items, std::nullopt), want_k = oracle_ap(items, cut);
    if (m.per_class[j].has_value() != want.has_value()) return "AP exclusion";
    if (!want) continue;
    if (*m.per_class[j] != *want) return "AP";
    if (*mk.per_class[j] != *want_k) return "AP@k";
    total += *want;
    total_k += *want_k;
    ++with_pos;
  }
  if (with_pos && m.value != total / with_pos) return "mAP";
  if (with_pos && mk.value != total_k / with_pos) return "mAP@k";
  return {};
}

Outcome criterion_oracles() {
  Outcome o;
  Rng rng(3);
  std::size_t grids = 0;
  for (int trial = 0; trial < 500; ++trial, ++grids) {
    const std::size_t m = 1 + rng.index(6), t = 1 + rng.index(5), l = 1 + rng.index(7);
    PredictionGrid g(m, t, l);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < t; ++b)
        for (std::size_t j = 0; j < l; ++j) g.set(a, b, j, rng.uniform());
    const auto p = max_pool_fusion(g);
    for (std::size_t j = 0; j < l; ++j) {
      bool attained = false;
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < t; ++b) {
          if (p[j] < g.at(a, b, j)) o.pass = false;
          attained = attained || p[j] == g.at(a, b, j);
        }
      }
      if (!attained) o.pass = false;
    }
  }
  if (!o.pass) o.detail += "fusion dominance violated; ";

  // Worked fixture: GT {A,B} predicted {A,C}; GT {A} predicted {A,B}.
  std::vector<EvalRecord> worked(2);
  worked[0].id = "img1";
  worked[0].scores = {0.9, 0.1, 0.8};
  worked[0].truth = {0, 1};
  worked[1].id = "img2";
  worked[1].scores = {0.9, 0.8, 0.1};
  worked[1].truth = {0};
  const OverallPr w = overall_pr(worked, 3, 0.5);
  if (w.precision != 0.5 || w.recall != 2.0 / 3.0) {
    o.pass = false;
    o.detail += "worked fixture op/or " + fmt("%.4f", w.precision) + "/" +
                fmt("%.4f", w.recall) + "; ";
  }
  const std::string wk = check_fixture(worked, 3, 3, 0.5, 2);
  if (!wk.empty()) {
    o.pass = false;
    o.detail += "worked fixture " + wk + " mismatch; ";
  }

  const double levels[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::size_t fixtures = 0;
  for (int trial = 0; trial < 5000; ++trial, ++fixtures) {
    const std::size_t n = 1 + rng.index(8), l = 1 + rng.index(5);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<EvalRecord> recs(n);
    for (std::size_t i = 0; i < n; ++i) {
      recs[i].id = "im" + std::to_string(order[i]);
      for (std::size_t j = 0; j < l; ++j) {
        recs[i].scores.push_back(rng.bernoulli(0.5) ? levels[rng.index(5)] : rng.uniform());
        if (rng.bernoulli(0.4)) recs[i].truth.push_back(j);
      }
      if (recs[i].truth.empty()) recs[i].truth.push_back(rng.index(l));
    }
    const std::string bad = check_fixture(recs, l, 1 + rng.index(l),
                                          rng.bernoulli(0.5) ? 0.0 : 0.5, 1 + rng.index(n + 1));
    if (!bad.empty()) {
      o.pass = false;
      o.detail += bad + " mismatch on fixture " + std::to_string(trial) + "; ";
      break;
    }
  }
  o.detail += std::to_string(grids) + " fusion grids, worked fixture op=" +
              fmt("%.4f", w.precision) + " or=" + fmt("%.4f", w.recall) + ", " +
              std::to_string(fixtures) + " random fixtures exact";
  return o;
}

// ---- criterion 4 ----

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

int quiet_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::cerr << "  [" << args.front() << "] " << err.str();
  return code;
}

Outcome criterion_determinism(const fs::path& work) {
  Outcome o;
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto fail = [&o](const std::string& why) {
    o.pass = false;
    o.detail += why + "; ";
  };
  for (const char* run : {"a", "b"}) {
    if (quiet_cli({"gen-data", "--out", (dir / run).string(), "--seed", "7", "--train", "16",
                   "--test", "6"}) != 0) {
      fail("gen-data failed");
      return o;
    }
  }
  if (tree(dir / "a") != tree(dir / "b")) fail("gen-data trees differ");
  std::ofstream(dir / "small.cfg")
      << "model.feature=32\nmodel.encoder_hidden=32\nmodel.embed=16\nmodel.hidden=32\n"
         "model.proposals=8\nmodel.head_channels=16\ntrain.m=16\ntrain.batch=4\n"
         "train.backbone.epochs=2\ntrain.localizer.epochs=2\ntrain.lstm.epochs=2\n"
         "train.rlsd.epochs=2\ntrain.rlsd-ft-rpn.epochs=2\n";
  std::size_t artifacts = 0;
  for (const char* kind : {"multi-cnn", "cnn-lstm", "rlsd", "rlsd-ft-rpn"}) {
    std::vector<std::string> bytes;
    for (const char* run : {"1", "2"}) {
      const std::string ckpt = (dir / (std::string(kind) + run + ".ckpt")).string();
      if (quiet_cli({"train", "--model", kind, "--data", (dir / "a").string(), "--out", ckpt,
                     "--seed", "1", "--config", (dir / "small.cfg").string()}) != 0) {
        fail(std::string("train ") + kind + " failed");
        return o;
      }
      const std::string rep = ckpt + ".eval.json";
      if (quiet_cli({"eval", "--checkpoint", ckpt, "--data", (dir / "a").string(), "--out",
                     rep, "--pr-class", "red-circle", "--recall-area"}) != 0) {
        fail(std::string("eval ") + kind + " failed");
        return o;
      }
      bytes.push_back(slurp(ckpt) + "|" + slurp(ckpt + ".loss.csv") + "|" + slurp(rep) +
                      "|" + slurp(rep + ".pr.red-circle.csv") + "|" +
                      slurp(rep + ".recall_area.csv"));
    }
    if (bytes[0] != bytes[1]) fail(std::string(kind) + " artifacts differ");
    artifacts += 5;
  }
  o.detail += "gen-data tree, 4 regimes x (checkpoint, loss log, report, 2 curves): " +
              std::to_string(artifacts) + " artifacts compared";
  return o;
}

// ---- criteria 5-7 ----

struct DeskResult {
  std::map<ModelKind, double> map, small_recall, minutes;
  double proposal_recall = -1.0;
};

DeskResult run_desk(std::size_t n_train, std::size_t n_test, const Config& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const Dataset data =
      generate_dataset(scene_spec_for(cfg.get_size("data.classes", 12), seed), n_train, n_test);
  std::cerr << "desk dataset: " << data.train.size() << " train / " << data.test.size()
            << " test, " << data.num_labels() << " labels ("
            << fmt("%.1fs", seconds_since(t0)) << ")\n";
  const ModelKind kinds[] = {ModelKind::kMultiCnn, ModelKind::kCnnLstm, ModelKind::kRlsd,
                             ModelKind::kRlsdFtRpn};
  const auto results = train_regimes(kinds, data, cfg, &std::cerr);
  DeskResult out;
  for (const auto& [kind, r] : results) {
    const TrainedModel model = model_from_checkpoint(decode_checkpoint(r.checkpoint_bytes),
                                                     model_kind_name(kind));
    const auto records = make_records(
        data.test, [&model](const Sample& s) { return model.predict(s.image); });
    out.map[kind] = mean_ap(records, data.num_labels()).value;
    out.small_recall[kind] = label_subset_recall(records, data.small_classes, 3, 0.5);
    double secs = 0.0;
    for (const auto& [stage, log] : r.stages) secs += log.seconds();
    out.minutes[kind] = secs / 60.0;
    if (r.proposal_recall >= 0.0) out.proposal_recall = r.proposal_recall;
    std::cerr << model_kind_name(kind) << ": mAP " << fmt("%.4f", out.map[kind])
              << " small-class recall@3 " << fmt("%.4f", out.small_recall[kind])
              << " train " << fmt("%.1f min", out.minutes[kind]) << "\n";
  }
  return out;
}

void print(int id, const Outcome& o) {
  std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
            << std::endl;
}

}  // namespace
}  // namespace rlsd

int main(int argc, char** argv) {
  using namespace rlsd;
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::size_t n_train = 2000, n_test = 500;
  std::string work = (fs::temp_directory_path() / "rlsd_acceptance").string();
  std::vector<std::string> sets;
  app.add_option("--only", only, "Run only these criteria (1-8)");
  app.add_option("--train", n_train, "Desk train images (criteria 5-7)");
  app.add_option("--test", n_test, "Desk test images (criteria 5-7)");
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--set", sets, "Config override for the desk run, key=value");
  CLI11_PARSE(app, argc, argv);
  auto selected = [&only](int c) {
    return only.empty() || std::find(only.begin(), only.end(), c) != only.end();
  };
  bool all = true;
  auto report = [&all](int id, const Outcome& o) {
    all = all && o.pass;
    print(id, o);
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("error: ") + e.what()};
    }
  };

  if (selected(1)) report(1, guarded(criterion_gradients));
  if (selected(2)) report(2, guarded(criterion_geometry));
  if (selected(3)) report(3, guarded(criterion_oracles));
  if (selected(4)) report(4, guarded([&] { return criterion_determinism(work); }));

  if (selected(5) || selected(6) || selected(7)) {
    Config cfg = default_config();
    for (const std::string& s : sets) cfg.apply(s);
    DeskResult d;
    std::string error;
    try {
      d = run_desk(n_train, n_test, cfg);
    } catch (const std::exception& e) {
      error = std::string("error: ") + e.what();
    }
    const std::string scale =
        " [" + std::to_string(n_train) + "/" + std::to_string(n_test) + " images]";
    using K = ModelKind;
    if (selected(5)) {
      Outcome o;
      if (!error.empty()) {
        o = {false, error};
      } else {
        const double rl = d.map[K::kRlsd], cl = d.map[K::kCnnLstm], mc = d.map[K::kMultiCnn];
        const double gap = d.small_recall[K::kRlsd] - d.small_recall[K::kCnnLstm];
        double slowest = 0.0;
        for (K k : {K::kMultiCnn, K::kCnnLstm, K::kRlsd}) {
          slowest = std::max(slowest, d.minutes[k]);
        }
        o.pass = rl >= cl && cl >= mc - 0.01 && gap >= 0.05 && slowest <= 30.0;
        o.detail = "mAP rlsd " + fmt("%.4f", rl) + " cnn-lstm " + fmt("%.4f", cl) +
                   " multi-cnn " + fmt("%.4f", mc) + "; small-class recall@3 rlsd " +
                   fmt("%.4f", d.small_recall[K::kRlsd]) + " cnn-lstm " +
                   fmt("%.4f", d.small_recall[K::kCnnLstm]) + " (gap " + fmt("%+.4f", gap) +
                   "); slowest of the three " + fmt("%.1f min", slowest) +
                   " incl. prerequisite stages" + scale;
      }
      report(5, o);
    }
    if (selected(6)) {
      Outcome o = error.empty() ? Outcome{d.proposal_recall >= 0.8,
                                          "proposal recall@32 " +
                                              fmt("%.4f", d.proposal_recall) + scale}
                                : Outcome{false, error};
      report(6, o);
    }
    if (selected(7)) {
      Outcome o;
      if (!error.empty()) {
        o = {false, error};
      } else {
        const double ft = d.map[K::kRlsdFtRpn], rl = d.map[K::kRlsd];
        o = {ft >= rl - 0.01,
             "mAP rlsd-ft-rpn " + fmt("%.4f", ft) + " vs rlsd " + fmt("%.4f", rl) +
                 "; rlsd-ft-rpn train " + fmt("%.1f min", d.minutes[K::kRlsdFtRpn]) + scale};
      }
      report(7, o);
    }
  }

  if (selected(8)) {
    report(8, guarded([] {
      Outcome o;
      LstmConfig cfg;
      cfg.num_labels = 6;
      cfg.embed = 5;
      cfg.hidden = 8;
      cfg.feature = 7;
      std::size_t stopped = 0, capped = 0;
      for (std::uint64_t draw = 0; draw < 1000; ++draw) {
        Rng rng(draw + 1);
        LabelLstm lstm(cfg, rng);
        const double scale = rng.uniform(0.2, 3.0);
        const ParamSet ps = lstm.params();
        for (const NamedTensor& p : ps.items()) {
          for (double& v : p.tensor.data()) v = rng.uniform(-scale, scale);
        }
        Tensor v = rand_t({7}, rng, -2, 2, false);
        const std::size_t t_max = 1 + rng.index(8);
        Tape tape(false);
        const auto steps = lstm.unroll_region(tape, v, t_max);
        bool ok = !steps.empty() && steps.size() <= t_max;
        for (std::size_t t = 0; ok && t < steps.size(); ++t) {
          const bool is_end = argmax_first(steps[t].data()) == lstm.end_index();
          // END may only appear as the halting step, where it is not emitted.
          if (is_end && t + 1 != steps.size()) ok = false;
        }
        const bool ended = argmax_first(steps.back().data()) == lstm.end_index();
        if (!ended && steps.size() != t_max) ok = false;
        // The fused label vector has no END entry.
        const std::vector<std::vector<Tensor>> regions = {steps};
        const Tensor fused = max_pool_fusion(tape, regions, cfg.num_labels);
        if (fused.size() != cfg.num_labels) ok = false;
        stopped += ended;
        capped += !ended;
        if (!ok) {
          o.pass = false;
          o.detail = "violation at draw " + std::to_string(draw) + "; ";
          break;
        }
      }
      o.detail += "1000 draws: " + std::to_string(stopped) + " halted at END, " +
                  std::to_string(capped) + " hit the step cap, no END emitted";
      return o;
    }));
  }
  return all ? 0 : 1;
}
