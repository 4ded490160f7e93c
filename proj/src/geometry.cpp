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

#include "rlsd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include "rlsd/ops.hpp"

namespace rlsd {

bool Box::contains(const Box& o, double eps) const {
  return o.left() >= left() - eps && o.right() <= right() + eps &&
         o.top() >= top() - eps && o.bottom() <= bottom() + eps;
}

Box Box::from_corners(double x0, double y0, double x1, double y1) {
  return Box{0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
}

Box decode_deltas(const Box& a, const BoxDeltas& t) {
  return Box{a.x + t.tx * a.w, a.y + t.ty * a.h,
             a.w * std::exp(std::clamp(t.tw, -kMaxLogScale, kMaxLogScale)),
             a.h * std::exp(std::clamp(t.th, -kMaxLogScale, kMaxLogScale))};
}

BoxDeltas encode_deltas(const Box& a, const Box& g) {
  if (!(g.w > 0.0 && g.h > 0.0)) {
    throw std::invalid_argument("encode_deltas: target box needs positive extents");
  }
  return BoxDeltas{(g.x - a.x) / a.w, (g.y - a.y) / a.h, std::log(g.w / a.w),
                   std::log(g.h / a.h)};
}

double smooth_l1(const BoxDeltas& p, const BoxDeltas& t) {
  return ops::smooth_l1_value(p.tx - t.tx) + ops::smooth_l1_value(p.ty - t.ty) +
         ops::smooth_l1_value(p.tw - t.tw) + ops::smooth_l1_value(p.th - t.th);
}

double iou(const Box& a, const Box& b) {
  const double iw =
      std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
  const double ih =
      std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Box clip_box(const Box& b, double width, double height, double min_size) {
  auto clip_axis = [min_size](double lo, double hi, double limit) {
    lo = std::clamp(lo, 0.0, limit);
    hi = std::clamp(hi, 0.0, limit);
    if (hi - lo < min_size) {
      const double c = std::clamp(0.5 * (lo + hi), 0.5 * min_size,
                                  limit - 0.5 * min_size);
      lo = c - 0.5 * min_size;
      hi = c + 0.5 * min_size;
    }
    return std::pair{lo, hi};
  };
  const auto [x0, x1] = clip_axis(b.left(), b.right(), width);
  const auto [y0, y1] = clip_axis(b.top(), b.bottom(), height);
  return Box::from_corners(x0, y0, x1, y1);
}

std::vector<Box> cluster_merge_boxes(std::span<const Box> boxes, double cutoff) {
  const std::size_t n = boxes.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&parent](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  // Cutting a single-linkage dendrogram at `cutoff` yields the connected
  // components of the graph joining centers at distance <= cutoff.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::hypot(boxes[i].x - boxes[j].x, boxes[i].y - boxes[j].y);
      if (d <= cutoff) {
        const std::size_t ri = root(i), rj = root(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }
  std::vector<Box> merged;
  std::vector<std::size_t> cluster_of(n, SIZE_MAX);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = root(i);
    if (cluster_of[r] == SIZE_MAX) {
      cluster_of[r] = merged.size();
      merged.push_back(boxes[i]);
      continue;
    }
    Box& m = merged[cluster_of[r]];
    m = Box::from_corners(std::min(m.left(), boxes[i].left()),
                          std::min(m.top(), boxes[i].top()),
                          std::max(m.right(), boxes[i].right()),
                          std::max(m.bottom(), boxes[i].bottom()));
  }
  return merged;
}

Box whole_image_box(double image_w, double image_h) {
  return Box{0.5 * image_w, 0.5 * image_h, image_w, image_h};
}

std::vector<ScoredBox> nms_select(std::span<const ScoredBox> proposals,
                                  std::size_t m, double iou_threshold,
                                  double image_w, double image_h) {
  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (proposals[a].confidence != proposals[b].confidence) {
      return proposals[a].confidence > proposals[b].confidence;
    }
    return proposals[a].source < proposals[b].source;
  });
  std::vector<ScoredBox> kept;
  kept.reserve(m + 1);
  for (std::size_t idx : order) {
    if (kept.size() >= m) break;
    const ScoredBox& cand = proposals[idx];
    bool suppressed = false;
    for (const ScoredBox& k : kept) {
      if (iou(k.box, cand.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  kept.push_back(ScoredBox{whole_image_box(image_w, image_h), 1.0, SIZE_MAX});
  return kept;
}

}  // namespace rlsd
