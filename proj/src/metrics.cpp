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

#include "rlsd/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace rlsd {
namespace {

bool contains(std::span<const std::size_t> set, std::size_t v) {
  return std::find(set.begin(), set.end(), v) != set.end();
}

void require_records(std::span<const EvalRecord> records, const char* op) {
  if (records.empty()) throw std::invalid_argument(std::string(op) + ": no records");
}

void sort_ranking(std::vector<RankedItem>& items) {
  std::stable_sort(items.begin(), items.end(),
                   [](const RankedItem& a, const RankedItem& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.id < b.id;
                   });
}

std::vector<RankedItem> class_ranking(std::span<const EvalRecord> records,
                                      std::size_t label) {
  std::vector<RankedItem> items;
  items.reserve(records.size());
  for (const EvalRecord& r : records) {
    items.push_back({r.id, r.scores.at(label), contains(r.truth, label)});
  }
  return items;
}

MapResult map_impl(std::span<const EvalRecord> records, std::size_t num_labels,
                   std::optional<std::size_t> limit) {
  require_records(records, "mean_ap");
  MapResult out;
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < num_labels; ++c) {
    auto ap = average_precision(class_ranking(records, c), limit);
    out.per_class.push_back(ap);
    if (ap) {
      total += *ap;
      ++counted;
    } else {
      out.excluded.push_back(c);
    }
  }
  out.value = counted ? total / static_cast<double>(counted) : 0.0;
  return out;
}

}  // namespace

std::vector<std::size_t> top_k_predict(std::span<const double> scores, std::size_t k,
                                       double threshold) {
  if (k == 0) throw std::invalid_argument("top_k_predict: k must be >= 1");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  order.resize(std::min(k, order.size()));
  std::vector<std::size_t> out;
  for (std::size_t l : order) {
    if (scores[l] > threshold) out.push_back(l);
  }
  return out;
}

OverallPr overall_pr(std::span<const EvalRecord> records, std::size_t k,
                     double threshold) {
  require_records(records, "overall_pr");
  std::size_t correct = 0, predicted = 0, truth = 0;
  for (const EvalRecord& r : records) {
    const auto pred = top_k_predict(r.scores, k, threshold);
    predicted += pred.size();
    truth += r.truth.size();
    for (std::size_t l : pred) correct += contains(r.truth, l) ? 1 : 0;
  }
  OverallPr out;
  if (predicted) out.precision = static_cast<double>(correct) / predicted;
  if (truth) out.recall = static_cast<double>(correct) / truth;
  return out;
}

PerClassPr per_class_pr(std::span<const EvalRecord> records, std::size_t num_labels,
                        std::size_t k, double threshold) {
  require_records(records, "per_class_pr");
  PerClassPr out;
  out.classes.resize(num_labels);
  for (const EvalRecord& r : records) {
    const auto pred = top_k_predict(r.scores, k, threshold);
    for (std::size_t l : pred) {
      ++out.classes.at(l).predicted;
      if (contains(r.truth, l)) ++out.classes[l].correct;
    }
    for (std::size_t l : r.truth) ++out.classes.at(l).truth;
  }
  double p_sum = 0.0, r_sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < num_labels; ++c) {
    ClassCounts& cc = out.classes[c];
    if (cc.predicted) cc.precision = static_cast<double>(cc.correct) / cc.predicted;
    if (cc.truth == 0) {
      cc.excluded = true;
      out.excluded.push_back(c);
      continue;
    }
    cc.recall = static_cast<double>(cc.correct) / cc.truth;
    p_sum += cc.precision;
    r_sum += cc.recall;
    ++counted;
  }
  if (counted) {
    out.precision = p_sum / counted;
    out.recall = r_sum / counted;
  }
  return out;
}

double label_subset_recall(std::span<const EvalRecord> records,
                           std::span<const std::size_t> labels, std::size_t k,
                           double threshold) {
  std::size_t correct = 0, truth = 0;
  for (const EvalRecord& r : records) {
    const auto pred = top_k_predict(r.scores, k, threshold);
    for (std::size_t l : r.truth) {
      if (!contains(labels, l)) continue;
      ++truth;
      if (contains(pred, l)) ++correct;
    }
  }
  return truth ? static_cast<double>(correct) / truth : 0.0;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

std::optional<double> average_precision(std::vector<RankedItem> items,
                                        std::optional<std::size_t> limit) {
  std::size_t positives = 0;
  for (const RankedItem& it : items) positives += it.positive ? 1 : 0;
  if (positives == 0) return std::nullopt;
  sort_ranking(items);
  std::size_t depth = items.size();
  if (limit) {
    if (*limit == 0) throw std::invalid_argument("average_precision: limit must be >= 1");
    depth = std::min(depth, *limit);
    positives = std::min(positives, *limit);
  }
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < depth; ++i) {
    if (!items[i].positive) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(positives);
}

MapResult mean_ap(std::span<const EvalRecord> records, std::size_t num_labels) {
  return map_impl(records, num_labels, std::nullopt);
}

MapResult map_at_k(std::span<const EvalRecord> records, std::size_t num_labels,
                   std::size_t k) {
  if (k == 0) throw std::invalid_argument("map_at_k: k must be >= 1");
  return map_impl(records, num_labels, k);
}

std::vector<CurvePoint> pr_curve(std::span<const EvalRecord> records,
                                 std::size_t label) {
  require_records(records, "pr_curve");
  auto items = class_ranking(records, label);
  const auto positives = static_cast<std::size_t>(std::count_if(
      items.begin(), items.end(), [](const RankedItem& it) { return it.positive; }));
  if (positives == 0) {
    throw std::invalid_argument("pr_curve: class " + std::to_string(label) +
                                " has no positives");
  }
  sort_ranking(items);
  std::vector<CurvePoint> out;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    hits += items[i].positive ? 1 : 0;
    if (i + 1 < items.size() && items[i + 1].score == items[i].score) continue;
    out.emplace_back(static_cast<double>(hits) / positives,
                     static_cast<double>(hits) / static_cast<double>(i + 1));
  }
  return out;
}

std::vector<double> default_area_edges() {
  return {0.0, 0.025, 0.05, 0.1, 0.15, 0.2, 0.3, 1.0};
}

std::vector<AreaBin> recall_vs_area(std::span<const EvalRecord> records,
                                    std::span<const double> edges, std::size_t k,
                                    double threshold) {
  if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end())) {
    throw std::invalid_argument("recall_vs_area: need >= 2 ascending bin edges");
  }
  std::vector<AreaBin> bins;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    bins.push_back(AreaBin{edges[i], edges[i + 1]});
  }
  for (const EvalRecord& r : records) {
    if (r.boxes.empty()) {
      throw std::invalid_argument("recall_vs_area: record '" + r.id +
                                  "' carries no object boxes");
    }
    if (!(r.image_w > 0.0 && r.image_h > 0.0)) {
      throw std::invalid_argument("recall_vs_area: record '" + r.id +
                                  "' has no image size");
    }
    const auto pred = top_k_predict(r.scores, k, threshold);
    for (const LabeledBox& b : r.boxes) {
      const double frac = b.box.area() / (r.image_w * r.image_h);
      std::size_t idx = bins.size();
      for (std::size_t i = 0; i < bins.size(); ++i) {
        const bool last = i + 1 == bins.size();
        if (frac >= bins[i].lo && (frac < bins[i].hi || (last && frac <= bins[i].hi))) {
          idx = i;
          break;
        }
      }
      if (idx == bins.size()) continue;
      ++bins[idx].instances;
      if (contains(pred, b.label)) ++bins[idx].hits;
    }
  }
  for (AreaBin& b : bins) {
    if (b.instances) b.recall = static_cast<double>(b.hits) / b.instances;
  }
  return bins;
}

MetricsReport evaluate_records(std::span<const EvalRecord> records,
                               std::span<const std::string> class_names,
                               std::size_t k, double threshold, std::size_t map_k) {
  const std::size_t l = class_names.size();
  for (const EvalRecord& r : records) {
    if (r.scores.size() != l) {
      throw std::invalid_argument("evaluate: record '" + r.id + "' has " +
                                  std::to_string(r.scores.size()) + " scores, expected " +
                                  std::to_string(l));
    }
  }
  MetricsReport rep;
  rep.k = k;
  rep.threshold = threshold;
  rep.map_k = map_k;
  rep.images = records.size();
  rep.class_names.assign(class_names.begin(), class_names.end());
  const OverallPr o = overall_pr(records, k, threshold);
  rep.op = o.precision;
  rep.orr = o.recall;
  rep.of1 = f1_score(o.precision, o.recall);
  const PerClassPr c = per_class_pr(records, l, k, threshold);
  rep.cp = c.precision;
  rep.cr = c.recall;
  rep.cf1 = f1_score(c.precision, c.recall);
  const MapResult m = mean_ap(records, l);
  rep.map = m.value;
  rep.per_class_ap = m.per_class;
  rep.excluded_classes = m.excluded;
  rep.map_at_k = map_at_k(records, l, map_k).value;
  return rep;
}

std::string MetricsReport::to_json(const std::string& extra_json) const {
  using nlohmann::json;
  json aps = json::array();
  for (const auto& ap : per_class_ap) aps.push_back(ap ? json(*ap) : json(nullptr));
  json j = {{"k", k},
            {"threshold", threshold},
            {"images", images},
            {"op", op},
            {"or", orr},
            {"overall_f1", of1},
            {"cp", cp},
            {"cr", cr},
            {"per_class_f1", cf1},
            {"mAP", map},
            {"mAP@k", map_at_k},
            {"mAP_k", map_k},
            {"ap_convention", "all-points"},
            {"per_class_ap", aps},
            {"classes", class_names},
            {"excluded_classes", excluded_classes}};
  json extra = json::parse(extra_json);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  return j.dump(2) + "\n";
}

std::string curve_csv(std::span<const CurvePoint> points) {
  std::string out = "x,y\n";
  char buf[64];
  for (const auto& [x, y] : points) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", x, y);
    out += buf;
  }
  return out;
}

std::vector<CurvePoint> area_curve(std::span<const AreaBin> bins) {
  std::vector<CurvePoint> out;
  for (const AreaBin& b : bins) {
    if (b.instances) out.emplace_back(0.5 * (b.lo + b.hi), b.recall);
  }
  return out;
}

}  // namespace rlsd
