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

#include <algorithm>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "rlsd/metrics.hpp"
#include "rlsd/rng.hpp"

namespace rlsd {
namespace {

EvalRecord rec(std::string id, std::vector<double> scores,
               std::vector<std::size_t> truth) {
  EvalRecord r;
  r.id = std::move(id);
  r.scores = std::move(scores);
  r.truth = std::move(truth);
  return r;
}

// GT {A,B} predicted {A,C}; GT {A} predicted {A,B}.
std::vector<EvalRecord> worked_fixture() {
  return {rec("img1", {0.9, 0.1, 0.8}, {0, 1}), rec("img2", {0.9, 0.8, 0.1}, {0})};
}

// Oracle: label l is predicted iff fewer than k labels outrank it and its
// score clears the threshold.
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

struct OracleCounts {
  std::vector<std::size_t> correct, predicted, truth;
};

OracleCounts oracle_counts(const std::vector<EvalRecord>& recs, std::size_t l,
                           std::size_t k, double threshold) {
  OracleCounts c{std::vector<std::size_t>(l), std::vector<std::size_t>(l),
                 std::vector<std::size_t>(l)};
  for (const EvalRecord& r : recs) {
    const auto pred = oracle_predict(r.scores, k, threshold);
    const std::set<std::size_t> gt(r.truth.begin(), r.truth.end());
    for (std::size_t j = 0; j < l; ++j) {
      c.predicted[j] += pred.count(j);
      c.truth[j] += gt.count(j);
      c.correct[j] += pred.count(j) && gt.count(j);
    }
  }
  return c;
}

// Oracle AP: each item's rank from pairwise comparisons, precision recomputed
// from scratch at every positive's rank.
std::optional<double> oracle_ap(const std::vector<RankedItem>& items,
                                std::optional<std::size_t> limit = {}) {
  const std::size_t n = items.size();
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t before = 0;
    for (std::size_t o = 0; o < n; ++o) {
      if (items[o].score > items[i].score ||
          (items[o].score == items[i].score && items[o].id < items[i].id)) {
        ++before;
      }
    }
    rank[i] = before + 1;
  }
  std::size_t positives = 0;
  for (const auto& it : items) positives += it.positive;
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

std::vector<RankedItem> ranking(const std::vector<EvalRecord>& recs, std::size_t c) {
  std::vector<RankedItem> out;
  for (const EvalRecord& r : recs) {
    out.push_back({r.id, r.scores[c],
                   std::find(r.truth.begin(), r.truth.end(), c) != r.truth.end()});
  }
  return out;
}

std::vector<EvalRecord> random_fixture(Rng& rng, std::size_t n, std::size_t l) {
  const double levels[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);  // ids not in record order
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    EvalRecord r;
    char id[16];
    std::snprintf(id, sizeof(id), "im%02zu", order[i]);
    r.id = id;
    for (std::size_t j = 0; j < l; ++j) {
      r.scores.push_back(rng.bernoulli(0.5) ? levels[rng.index(5)] : rng.uniform());
      if (rng.bernoulli(0.4)) r.truth.push_back(j);
    }
    if (r.truth.empty()) r.truth.push_back(rng.index(l));
    out.push_back(std::move(r));
  }
  return out;
}

TEST(TopK, Examples) {
  const std::vector<double> s = {0.9, 0.6, 0.4, 0.1};
  EXPECT_EQ(top_k_predict(s, 3, 0.5), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(top_k_predict(std::vector<double>{0.3, 0.7, 0.7, 0.7}, 2, 0.0),
            (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(top_k_predict(std::vector<double>{0.1, 0.2}, 2, 0.5).empty());
  EXPECT_EQ(top_k_predict(s, 10, 0.0).size(), 4u);
  EXPECT_THROW(top_k_predict(s, 0, 0.5), std::invalid_argument);
}

TEST(OverallPr, WorkedFixture) {
  const auto recs = worked_fixture();
  const OverallPr o = overall_pr(recs, 3, 0.5);
  EXPECT_EQ(o.precision, 0.5);
  EXPECT_EQ(o.recall, 2.0 / 3.0);
}

TEST(OverallPr, PerfectAndEmpty) {
  std::vector<EvalRecord> recs = {rec("a", {1, 0, 1}, {0, 2}), rec("b", {0, 1, 0}, {1})};
  const OverallPr perfect = overall_pr(recs, 2, 0.0);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  const OverallPr none = overall_pr(recs, 2, 5.0);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_THROW(overall_pr(std::vector<EvalRecord>{}, 3, 0.5), std::invalid_argument);
}

TEST(PerClassPr, WorkedFixture) {
  const auto recs = worked_fixture();
  const PerClassPr c = per_class_pr(recs, 3, 3, 0.5);
  // A: 2/2 and 2/2. B: predicted once wrongly, missed once. C: no truth.
  EXPECT_EQ(c.classes[0].precision, 1.0);
  EXPECT_EQ(c.classes[0].recall, 1.0);
  EXPECT_EQ(c.classes[1].precision, 0.0);
  EXPECT_EQ(c.classes[1].recall, 0.0);
  EXPECT_TRUE(c.classes[2].excluded);
  EXPECT_EQ(c.excluded, (std::vector<std::size_t>{2}));
  EXPECT_EQ(c.precision, 0.5);
  EXPECT_EQ(c.recall, 0.5);
}

TEST(PerClassPr, SingleCorrectAndNeverPredicted) {
  std::vector<EvalRecord> one = {rec("a", {0.9}, {0})};
  const PerClassPr c = per_class_pr(one, 1, 3, 0.5);
  EXPECT_EQ(c.precision, 1.0);
  EXPECT_EQ(c.recall, 1.0);
  std::vector<EvalRecord> miss = {rec("a", {0.9, 0.1}, {0, 1})};
  const PerClassPr m = per_class_pr(miss, 2, 3, 0.5);
  EXPECT_EQ(m.classes[1].predicted, 0u);
  EXPECT_EQ(m.classes[1].precision, 0.0);
  EXPECT_EQ(m.precision, 0.5);
}

TEST(Metrics, MatchBruteForceOracles) {
  Rng rng(2024);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t n = 1 + rng.index(8), l = 1 + rng.index(5);
    const auto recs = random_fixture(rng, n, l);
    const std::size_t k = 1 + rng.index(l);
    const double thr = rng.bernoulli(0.5) ? 0.0 : 0.5;
    const OracleCounts c = oracle_counts(recs, l, k, thr);

    std::size_t sc = 0, sp = 0, sg = 0;
    for (std::size_t j = 0; j < l; ++j) {
      sc += c.correct[j];
      sp += c.predicted[j];
      sg += c.truth[j];
    }
    const OverallPr o = overall_pr(recs, k, thr);
    EXPECT_EQ(o.precision, sp ? static_cast<double>(sc) / sp : 0.0);
    EXPECT_EQ(o.recall, static_cast<double>(sc) / sg);

    double cp = 0, cr = 0;
    std::size_t counted = 0;
    for (std::size_t j = 0; j < l; ++j) {
      if (c.truth[j] == 0) continue;
      cp += c.predicted[j] ? static_cast<double>(c.correct[j]) / c.predicted[j] : 0.0;
      cr += static_cast<double>(c.correct[j]) / c.truth[j];
      ++counted;
    }
    const PerClassPr pc = per_class_pr(recs, l, k, thr);
    EXPECT_EQ(pc.precision, cp / counted);
    EXPECT_EQ(pc.recall, cr / counted);

    const MapResult m = mean_ap(recs, l);
    const std::size_t cut = 1 + rng.index(n + 1);
    const MapResult mk = map_at_k(recs, l, cut);
    double total = 0, total_k = 0;
    std::size_t with_pos = 0;
    for (std::size_t j = 0; j < l; ++j) {
      const auto want = oracle_ap(ranking(recs, j));
      const auto want_k = oracle_ap(ranking(recs, j), cut);
      ASSERT_EQ(m.per_class[j].has_value(), want.has_value());
      if (!want) continue;
      EXPECT_EQ(*m.per_class[j], *want);
      EXPECT_EQ(*mk.per_class[j], *want_k);
      total += *want;
      total_k += *want_k;
      ++with_pos;
    }
    EXPECT_EQ(m.value, total / with_pos);
    EXPECT_EQ(mk.value, total_k / with_pos);
  }
}

TEST(Metrics, RatesStayInUnitInterval) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.index(8), l = 1 + rng.index(5);
    const auto recs = random_fixture(rng, n, l);
    const auto o = overall_pr(recs, 1 + rng.index(l), rng.uniform());
    const auto c = per_class_pr(recs, l, 1 + rng.index(l), rng.uniform());
    for (double v : {o.precision, o.recall, c.precision, c.recall}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    for (const auto& ap : mean_ap(recs, l).per_class) {
      if (!ap) continue;
      EXPECT_GE(*ap, 0.0);
      EXPECT_LE(*ap, 1.0);
    }
  }
}

TEST(Metrics, OverallInvariantUnderRelabeling) {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.index(8), l = 2 + rng.index(4);
    auto recs = random_fixture(rng, n, l);
    for (auto& r : recs) {
      for (double& s : r.scores) s = rng.uniform();  // no ties
    }
    std::vector<std::size_t> perm(l);
    for (std::size_t j = 0; j < l; ++j) perm[j] = j;
    rng.shuffle(perm);
    auto moved = recs;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < l; ++j) moved[i].scores[perm[j]] = recs[i].scores[j];
      for (auto& t : moved[i].truth) t = perm[t];
    }
    const std::size_t k = 1 + rng.index(l);
    const auto a = overall_pr(recs, k, 0.5), b = overall_pr(moved, k, 0.5);
    EXPECT_EQ(a.precision, b.precision);
    EXPECT_EQ(a.recall, b.recall);
  }
}

TEST(Metrics, RecallMonotoneInK) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.index(8), l = 1 + rng.index(5);
    const auto recs = random_fixture(rng, n, l);
    double prev = 0.0;
    for (std::size_t k = 1; k <= l + 1; ++k) {
      const double r = overall_pr(recs, k, 0.0).recall;
      EXPECT_GE(r, prev);
      prev = r;
    }
  }
}

TEST(AveragePrecision, Examples) {
  EXPECT_EQ(*average_precision({{"a", 0.9, true}, {"b", 0.8, true}, {"c", 0.1, false}}),
            1.0);
  EXPECT_DOUBLE_EQ(
      *average_precision({{"a", 0.9, true}, {"b", 0.5, false}, {"c", 0.2, true}}),
      5.0 / 6.0);
  EXPECT_EQ(*average_precision({{"a", 0.3, true}}), 1.0);
  EXPECT_FALSE(average_precision({{"a", 0.3, false}}).has_value());
  // Equal scores rank by ascending id.
  EXPECT_DOUBLE_EQ(*average_precision({{"b", 0.5, true}, {"a", 0.5, false}}), 0.5);
}

TEST(MeanAp, OneClassAndVacuousTruncation) {
  std::vector<EvalRecord> recs = {rec("a", {0.9}, {0}), rec("b", {0.5}, {}),
                                  rec("c", {0.2}, {0})};
  recs[1].truth.clear();
  EXPECT_DOUBLE_EQ(mean_ap(recs, 1).value, 5.0 / 6.0);
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(8), l = 1 + rng.index(5);
    const auto r = random_fixture(rng, n, l);
    EXPECT_EQ(map_at_k(r, l, n + rng.index(3)).value, mean_ap(r, l).value);
  }
}

TEST(MeanAp, HandFixture) {
  // 4 images, 2 classes.
  std::vector<EvalRecord> recs = {rec("i1", {0.9, 0.2}, {0}), rec("i2", {0.8, 0.7}, {1}),
                                  rec("i3", {0.3, 0.6}, {0, 1}), rec("i4", {0.1, 0.9}, {})};
  recs[3].truth.clear();
  // class 0 ranking i1+, i2-, i3+, i4-: (1 + 2/3)/2. class 1: i4-, i2+, i3+, i1-:
  // (1/2 + 2/3)/2.
  const double ap0 = (1.0 + 2.0 / 3.0) / 2.0, ap1 = (0.5 + 2.0 / 3.0) / 2.0;
  EXPECT_DOUBLE_EQ(mean_ap(recs, 2).value, (ap0 + ap1) / 2.0);
  // Top-2 only: class 0 keeps i1+ (1/1), capped positives 2 -> 0.5; class 1
  // keeps i4-, i2+ -> (1/2)/2.
  EXPECT_DOUBLE_EQ(map_at_k(recs, 2, 2).value, (0.5 + 0.25) / 2.0);
}

TEST(PrCurve, Examples) {
  std::vector<EvalRecord> recs = {rec("a", {0.9}, {0}), rec("b", {0.8}, {0}),
                                  rec("c", {0.1}, {})};
  recs[2].truth.clear();
  const auto curve = pr_curve(recs, 0);
  EXPECT_NE(std::find(curve.begin(), curve.end(), CurvePoint{1.0, 1.0}), curve.end());
  EXPECT_EQ(pr_curve(std::vector<EvalRecord>{rec("x", {0.4}, {0})}, 0).size(), 1u);
  std::vector<EvalRecord> none = {rec("x", {0.4, 0.2}, {1})};
  EXPECT_THROW(pr_curve(none, 0), std::invalid_argument);
}

TEST(PrCurve, RandomScoresTendToBaseRate) {
  Rng rng(7);
  std::vector<EvalRecord> recs;
  for (int i = 0; i < 10000; ++i) {
    EvalRecord r = rec("r" + std::to_string(i), {rng.uniform()}, {});
    if (i % 2 == 0) r.truth.push_back(0);
    recs.push_back(std::move(r));
  }
  const auto curve = pr_curve(recs, 0);
  double prev = 0.0;
  for (const auto& [rc, pr] : curve) {
    EXPECT_GE(rc, prev);
    prev = rc;
  }
  EXPECT_EQ(curve.back().first, 1.0);
  EXPECT_NEAR(curve.back().second, 0.5, 0.05);
}

EvalRecord boxed(std::string id, std::vector<double> scores,
                 std::vector<LabeledBox> boxes) {
  EvalRecord r = rec(std::move(id), std::move(scores), {});
  for (const auto& b : boxes) r.truth.push_back(b.label);
  r.boxes = std::move(boxes);
  r.image_w = r.image_h = 64.0;
  return r;
}

TEST(RecallVsArea, Examples) {
  const Box small{20, 20, 10, 10}, large{32, 32, 40, 40};
  // 2 small objects (labels 0, 1) and 2 large ones (labels 2, 3).
  std::vector<EvalRecord> recs = {
      boxed("a", {0.1, 0.1, 0.9, 0.1}, {{0, small}, {2, large}}),
      boxed("b", {0.1, 0.1, 0.1, 0.9}, {{1, small}, {3, large}})};
  const std::vector<double> edges = {0.0, 0.1, 1.0};
  const auto bins = recall_vs_area(recs, edges, 3, 0.5);
  ASSERT_EQ(bins.size(), 2u);
  EXPECT_EQ(bins[0].instances, 2u);
  EXPECT_EQ(bins[0].recall, 0.0);
  EXPECT_EQ(bins[1].instances, 2u);
  EXPECT_EQ(bins[1].recall, 1.0);

  for (auto& r : recs) r.scores.assign(4, 1.0);
  for (const auto& b : recall_vs_area(recs, edges, 4, 0.5)) EXPECT_EQ(b.recall, 1.0);
  for (auto& r : recs) r.scores.assign(4, 0.0);
  for (const auto& b : recall_vs_area(recs, edges, 4, 0.5)) EXPECT_EQ(b.recall, 0.0);

  recs[0].boxes.clear();
  EXPECT_THROW(recall_vs_area(recs, edges, 3, 0.5), std::invalid_argument);
}

TEST(Report, F1AndJsonEcho) {
  EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(f1_score(0.5, 1.0), 2.0 / 3.0);
  const auto recs = worked_fixture();
  const std::vector<std::string> names = {"A", "B", "C"};
  const MetricsReport rep = evaluate_records(recs, names, 3, 0.5);
  const auto j = nlohmann::json::parse(rep.to_json());
  EXPECT_EQ(j["k"], 3);
  EXPECT_EQ(j["threshold"], 0.5);
  EXPECT_EQ(j["op"], 0.5);
  EXPECT_EQ(j["excluded_classes"], nlohmann::json::array({2}));
  EXPECT_THROW(evaluate_records(recs, std::vector<std::string>{"A"}, 3, 0.5),
               std::invalid_argument);
}

TEST(Report, CurveCsvFormat) {
  const std::vector<CurvePoint> pts = {{0.5, 1.0}, {1.0, 2.0 / 3.0}};
  EXPECT_EQ(curve_csv(pts), "x,y\n0.500000,1.000000\n1.000000,0.666667\n");
}

}  // namespace
}  // namespace rlsd
