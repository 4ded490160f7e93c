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
#include <numeric>

#include "rlsd/fusion.hpp"
#include "rlsd/grad_check.hpp"
#include "rlsd/label_rnn.hpp"
#include "rlsd/ops.hpp"
#include "test_util.hpp"

namespace rlsd {
namespace {

using testing::random_tensor;
using testing::values;

LstmConfig small_config() {
  LstmConfig cfg;
  cfg.num_labels = 4;
  cfg.embed = 5;
  cfg.hidden = 6;
  cfg.feature = 7;
  return cfg;
}

void zero_all(const LabelLstm& lstm) {
  for (const Tensor& t : testing::tensors(lstm.params())) {
    std::fill(t.data().begin(), t.data().end(), 0.0);
  }
}

// Random weights at a larger scale so sequences vary across draws.
void randomize(const LabelLstm& lstm, Rng& rng, double scale) {
  for (const Tensor& t : testing::tensors(lstm.params())) {
    for (double& v : t.data()) v = rng.uniform(-scale, scale);
  }
}

const Tensor& param(const LabelLstm& lstm, const char* name) {
  static thread_local ParamSet keep;
  keep = lstm.params();
  return *keep.find(name);
}

TEST(LstmStep, ZeroParamsClosedForm) {
  Rng rng(1);
  LabelLstm lstm(small_config(), rng);
  zero_all(lstm);
  Tape tape(false);
  const LstmStep s = lstm.step(tape, Tensor::zeros({5}), lstm.zero_state());
  for (double v : s.state.c.data()) EXPECT_EQ(v, 0.0);
  for (double v : s.state.h.data()) EXPECT_EQ(v, 0.0);
  for (double v : s.probs.data()) EXPECT_NEAR(v, 0.2, 1e-15);

  LstmState prev = lstm.zero_state();
  prev.c = Tensor::from({6}, {1, -2, 3, 0.5, 0, 4});
  const LstmStep t = lstm.step(tape, Tensor::zeros({5}), prev);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(t.state.c.at(i), 0.5 * prev.c.at(i));
}

TEST(LstmStep, ShapeMismatchRejected) {
  Rng rng(2);
  LabelLstm lstm(small_config(), rng);
  Tape tape(false);
  EXPECT_THROW(lstm.step(tape, Tensor::zeros({4}), lstm.zero_state()),
               std::invalid_argument);
  LstmState bad{Tensor::zeros({3}), Tensor::zeros({3})};
  EXPECT_THROW(lstm.step(tape, Tensor::zeros({5}), bad), std::invalid_argument);
  EXPECT_THROW(lstm.init_from_region(tape, Tensor::zeros({6})), std::invalid_argument);
}

TEST(LstmStep, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    LabelLstm lstm(small_config(), rng);
    randomize(lstm, rng, 0.8);
    Tensor x = random_tensor({5}, rng);
    Tensor h = random_tensor({6}, rng, -0.9, 0.9);
    Tensor c = random_tensor({6}, rng);
    std::vector<Tensor> pts = testing::tensors(lstm.params());
    pts.insert(pts.end(), {x, h, c});
    auto f = [&](Tape& t) {
      const LstmStep s = lstm.step(t, x, LstmState{h, c});
      Rng w(seed);
      Tensor loss = ops::sum(t, ops::mul(t, s.probs, random_tensor({5}, w, -1, 1, false)));
      Tensor hs = ops::sum(t, ops::mul(t, s.state.h, random_tensor({6}, w, -1, 1, false)));
      Tensor cs = ops::sum(t, ops::mul(t, s.state.c, random_tensor({6}, w, -1, 1, false)));
      return ops::add(t, loss, ops::add(t, hs, cs));
    };
    EXPECT_LT(grad_check(f, pts), 1e-4) << "seed " << seed;
  }
}

TEST(LstmStep, DistributionsSumToOneAndHiddenBounded) {
  Rng rng(3);
  LabelLstm lstm(small_config(), rng);
  Tape tape(false);
  for (int trial = 0; trial < 50; ++trial) {
    randomize(lstm, rng, 3.0);
    Tensor v = random_tensor({7}, rng, -3, 3, false);
    const LstmStep s = lstm.init_from_region(tape, v);
    const auto p = values(s.probs);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    for (double x : p) EXPECT_GE(x, 0.0);
    for (double x : s.state.h.data()) {
      EXPECT_GT(x, -1.0);
      EXPECT_LT(x, 1.0);
    }
  }
}

TEST(InitFromRegion, ZeroAndDeterministic) {
  Rng rng(4);
  LabelLstm lstm(small_config(), rng);
  Tape tape(false);
  Tensor v = random_tensor({7}, rng, -1, 1, false);
  EXPECT_EQ(values(lstm.init_from_region(tape, v).state.h),
            values(lstm.init_from_region(tape, v).state.h));
  zero_all(lstm);
  const LstmStep zero = lstm.init_from_region(tape, Tensor::zeros({7}));
  for (double x : zero.state.h.data()) EXPECT_EQ(x, 0.0);
}

TEST(LatentLabel, Examples) {
  EXPECT_EQ(latent_label(std::vector<double>{0.1, 0.7, 0.2}),
            (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(latent_label(std::vector<double>{0.5, 0.5}), (std::vector<double>{1, 0}));
  EXPECT_EQ(argmax_first(std::vector<double>(6, 1.0 / 6)), 0u);
}

TEST(LatentLabel, DependsOnlyOnOrdering) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = testing::random_values(6, rng, 0, 1);
    std::vector<double> q(p.size());
    // Any strictly increasing map preserves the ordering.
    for (std::size_t i = 0; i < p.size(); ++i) q[i] = std::exp(3 * p[i]) + 0.25;
    EXPECT_EQ(latent_label(p), latent_label(q));
  }
}

TEST(LatentLabel, NoGradientThroughFeedback) {
  Rng rng(6);
  LabelLstm lstm(small_config(), rng);
  randomize(lstm, rng, 0.8);
  Tensor v = random_tensor({7}, rng, -1, 1, false);
  // Gradient reaches W_es only through the embedded one-hot, so only the
  // column of the fed-back label may be non-zero.
  Tape tape;
  const auto steps = lstm.unroll_region(tape, v, 1);
  Tape probe(false);
  const std::size_t fed = argmax_first(lstm.init_from_region(probe, v).probs.data());
  backward(tape, ops::sum(tape, ops::square(tape, steps[0])));
  const Tensor& w_es = param(lstm, "W_es");
  const std::size_t cols = w_es.dim(1);
  for (std::size_t r = 0; r < w_es.dim(0); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c != fed) EXPECT_EQ(w_es.grad()[r * cols + c], 0.0);
    }
  }
  // Perturbing a non-argmax entry leaves the latent label unchanged.
  auto p = values(lstm.init_from_region(probe, v).probs);
  const auto before = latent_label(p);
  const std::size_t other = (fed + 1) % p.size();
  p[other] = 0.5 * (p[other] + p[fed]);
  EXPECT_EQ(latent_label(p), before);
}

TEST(UnrollRegion, StopAndCapRules) {
  Rng rng(7);
  LabelLstm lstm(small_config(), rng);
  zero_all(lstm);
  Tape tape(false);
  Tensor v = random_tensor({7}, rng, -1, 1, false);
  param(lstm, "b_out").data()[lstm.end_index()] = 50.0;
  EXPECT_EQ(lstm.unroll_region(tape, v, 6).size(), 1u);
  param(lstm, "b_out").data()[lstm.end_index()] = -50.0;
  EXPECT_EQ(lstm.unroll_region(tape, v, 6).size(), 6u);
  EXPECT_THROW(lstm.unroll_region(tape, v, 0), std::invalid_argument);
}

TEST(UnrollRegion, Deterministic) {
  Rng rng(8);
  LabelLstm lstm(small_config(), rng);
  randomize(lstm, rng, 1.5);
  Tensor v = random_tensor({7}, rng, -1, 1, false);
  Tape a(false), b(false);
  const auto s1 = lstm.unroll_region(a, v, 8);
  const auto s2 = lstm.unroll_region(b, v, 8);
  ASSERT_EQ(s1.size(), s2.size());
  for (std::size_t t = 0; t < s1.size(); ++t) EXPECT_EQ(values(s1[t]), values(s2[t]));
}

// Early-stop contract over many random parameter draws.
TEST(UnrollRegion, HaltsAtEndAndNeverEmitsEnd) {
  Rng rng(9);
  LabelLstm lstm(small_config(), rng);
  const std::size_t t_max = 6, end = lstm.end_index();
  std::size_t stopped = 0, capped = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    randomize(lstm, rng, 2.5);
    Tensor v = random_tensor({7}, rng, -2, 2, false);
    Tape tape(false);
    const auto steps = lstm.unroll_region(tape, v, t_max);
    ASSERT_GE(steps.size(), 1u);
    ASSERT_LE(steps.size(), t_max);
    for (std::size_t t = 0; t + 1 < steps.size(); ++t) {
      ASSERT_NE(argmax_first(steps[t].data()), end) << "draw " << draw;
    }
    if (steps.size() < t_max) {
      ASSERT_EQ(argmax_first(steps.back().data()), end) << "draw " << draw;
      ++stopped;
    } else {
      ++capped;
    }
    const auto scores = max_over_steps(steps, lstm.num_labels());
    EXPECT_EQ(scores.size(), lstm.num_labels());
  }
  // Both branches of the contract were exercised.
  EXPECT_GT(stopped, 50u);
  EXPECT_GT(capped, 50u);
}

TEST(UnrollRegions, BatchMatchesSingleUnrolls) {
  Rng rng(10);
  LabelLstm lstm(small_config(), rng);
  for (int draw = 0; draw < 50; ++draw) {
    randomize(lstm, rng, 2.0);
    Tensor feats = random_tensor({5, 7}, rng, -2, 2, false);
    Tape tape(false);
    const RegionUnroll u = lstm.unroll_regions(tape, feats, 6);
    ASSERT_EQ(u.regions(), 5u);
    for (std::size_t m = 0; m < 5; ++m) {
      Tensor row = Tensor::from({7}, {feats.data().begin() + 7 * m,
                                      feats.data().begin() + 7 * (m + 1)});
      const auto single = lstm.unroll_region(tape, row, 6);
      ASSERT_EQ(u.lengths[m], single.size());
      for (std::size_t t = 0; t < single.size(); ++t) {
        const auto d = u.distribution(m, t);
        for (std::size_t j = 0; j < d.size(); ++j) {
          EXPECT_NEAR(d[j], single[t].at(j), 1e-12);
        }
      }
    }
    EXPECT_THROW(u.distribution(0, u.lengths[0]), std::out_of_range);
  }
}

TEST(GlobalForward, TargetsAndLoss) {
  EXPECT_EQ(normalized_target(std::vector<double>{0, 1, 0}),
            (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(normalized_target(std::vector<double>{1, 0, 1, 0}),
            (std::vector<double>{0.5, 0, 0.5, 0}));
  EXPECT_THROW(normalized_target(std::vector<double>{0, 0}), std::invalid_argument);

  Rng rng(11);
  LabelLstm lstm(small_config(), rng);
  Tape tape(false);
  Tensor v = random_tensor({7}, rng, -1, 1, false);
  const std::vector<double> y = {1, 0, 1, 0};
  const auto r = lstm.global_forward(tape, v, y, 3);
  ASSERT_EQ(r.distributions.size(), 3u);
  double expect = 0.0;
  for (const Tensor& p : r.distributions) {
    for (std::size_t j = 0; j < 4; ++j) expect += std::pow(p.at(j) - 0.5 * y[j], 2);
  }
  EXPECT_NEAR(r.loss.item(), expect / 3.0, 1e-12);
  EXPECT_FALSE(lstm.global_forward(tape, v, {}, 2).loss.defined());
}

TEST(GlobalForward, TwoStepGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    LabelLstm lstm(small_config(), rng);
    randomize(lstm, rng, 0.8);
    Tensor v = random_tensor({7}, rng);
    std::vector<Tensor> pts = testing::tensors(lstm.params());
    pts.push_back(v);
    const std::vector<double> y = {0, 1, 1, 0};
    auto f = [&](Tape& t) { return lstm.global_forward(t, v, y, 2).loss; };
    EXPECT_LT(grad_check(f, pts), 1e-4) << "seed " << seed;
  }
}

// Two-step region unroll, max-pool fusion and the squared loss end to end.
TEST(UnrollFusionLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    LabelLstm lstm(small_config(), rng);
    randomize(lstm, rng, 0.8);
    param(lstm, "b_out").data()[lstm.end_index()] = -5.0;  // both steps emitted
    Tensor feats = random_tensor({3, 7}, rng);
    std::vector<Tensor> pts = testing::tensors(lstm.params());
    pts.push_back(feats);
    const std::vector<double> y = {1, 0, 0, 1};
    auto f = [&](Tape& t) {
      const RegionUnroll u = lstm.unroll_regions(t, feats, 2);
      return fusion_loss(t, max_pool_fusion(t, u, lstm.num_labels()), y);
    };
    Tape probe(false);
    const RegionUnroll u = lstm.unroll_regions(probe, feats, 2);
    ASSERT_EQ(u.steps.size(), 2u);
    EXPECT_LT(grad_check(f, pts), 1e-4) << "seed " << seed;
  }
}

}  // namespace
}  // namespace rlsd
