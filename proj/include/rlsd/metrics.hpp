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

#ifndef RLSD_METRICS_HPP_
#define RLSD_METRICS_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlsd/synthdata.hpp"

namespace rlsd {

struct EvalRecord {
  std::string id;
  std::vector<double> scores;      // one per label
  std::vector<std::size_t> truth;  // ground-truth label ids
  std::vector<LabeledBox> boxes;   // optional, for recall_vs_area
  double image_w = 0.0;
  double image_h = 0.0;
};

// k highest scores (ties to the lower index), then those strictly above
// threshold. Result is in rank order.
std::vector<std::size_t> top_k_predict(std::span<const double> scores, std::size_t k,
                                       double threshold);

struct OverallPr {
  double precision = 0.0;
  double recall = 0.0;
};

OverallPr overall_pr(std::span<const EvalRecord> records, std::size_t k,
                     double threshold);

struct ClassCounts {
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t truth = 0;
  double precision = 0.0;
  double recall = 0.0;
  bool excluded = false;  // no ground-truth instances
};

struct PerClassPr {
  double precision = 0.0;
  double recall = 0.0;
  std::vector<ClassCounts> classes;
  std::vector<std::size_t> excluded;
};

PerClassPr per_class_pr(std::span<const EvalRecord> records, std::size_t num_labels,
                        std::size_t k, double threshold);

// Micro recall restricted to the given labels.
double label_subset_recall(std::span<const EvalRecord> records,
                           std::span<const std::size_t> labels, std::size_t k,
                           double threshold);

double f1_score(double precision, double recall);

struct RankedItem {
  std::string id;
  double score = 0.0;
  bool positive = false;
};

// All-points AP over a ranking by descending score, ties by ascending id.
// With `limit`, only the top `limit` items are scored and the positive count
// is capped at `limit`. Empty when there are no positives.
std::optional<double> average_precision(std::vector<RankedItem> items,
                                        std::optional<std::size_t> limit = {});

struct MapResult {
  double value = 0.0;
  std::vector<std::optional<double>> per_class;
  std::vector<std::size_t> excluded;
};

MapResult mean_ap(std::span<const EvalRecord> records, std::size_t num_labels);
MapResult map_at_k(std::span<const EvalRecord> records, std::size_t num_labels,
                   std::size_t k);

using CurvePoint = std::pair<double, double>;  // (x, y)

// (recall, precision) after each group of equal scores.
std::vector<CurvePoint> pr_curve(std::span<const EvalRecord> records,
                                 std::size_t label);

struct AreaBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t instances = 0;
  std::size_t hits = 0;
  double recall = 0.0;
};

std::vector<double> default_area_edges();

// Bins ground-truth instances by box area / image area; `edges` are
// ascending bin boundaries (bins are [lo, hi), the last one closed).
std::vector<AreaBin> recall_vs_area(std::span<const EvalRecord> records,
                                    std::span<const double> edges, std::size_t k,
                                    double threshold);

struct MetricsReport {
  std::size_t k = 3;
  double threshold = 0.5;
  double op = 0.0, orr = 0.0, of1 = 0.0;
  double cp = 0.0, cr = 0.0, cf1 = 0.0;
  double map = 0.0;
  double map_at_k = 0.0;
  std::size_t map_k = 10;
  std::vector<std::optional<double>> per_class_ap;
  std::vector<std::size_t> excluded_classes;
  std::vector<std::string> class_names;
  std::size_t images = 0;

  std::string to_json(const std::string& extra_json = "{}") const;
};

MetricsReport evaluate_records(std::span<const EvalRecord> records,
                               std::span<const std::string> class_names,
                               std::size_t k, double threshold,
                               std::size_t map_k = 10);

std::string curve_csv(std::span<const CurvePoint> points);
std::vector<CurvePoint> area_curve(std::span<const AreaBin> bins);

}  // namespace rlsd

#endif  // RLSD_METRICS_HPP_
