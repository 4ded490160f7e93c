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

#ifndef RLSD_GEOMETRY_HPP_
#define RLSD_GEOMETRY_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace rlsd {

// Axis-aligned rectangle in center format, pixel units.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double left() const { return x - 0.5 * w; }
  double right() const { return x + 0.5 * w; }
  double top() const { return y - 0.5 * h; }
  double bottom() const { return y + 0.5 * h; }
  double area() const { return w * h; }
  bool contains(const Box& other, double eps = 1e-9) const;

  static Box from_corners(double x0, double y0, double x1, double y1);
  friend bool operator==(const Box&, const Box&) = default;
};

// Log-space offsets from an anchor to a box.
struct BoxDeltas {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;

  friend bool operator==(const BoxDeltas&, const BoxDeltas&) = default;
};

struct AnchorBox {
  Box box;
  std::size_t scale_index = 0;
  std::size_t ratio_index = 0;
  std::size_t row = 0;  // feature-map cell (i, j)
  std::size_t col = 0;
};

struct ScoredBox {
  Box box;
  double confidence = 0.0;
  std::size_t source = 0;  // anchor index, or SIZE_MAX for the image box
};

// Scale deltas are clamped to this range before exponentiation.
inline constexpr double kMaxLogScale = 4.0;

Box decode_deltas(const Box& anchor, const BoxDeltas& t);
BoxDeltas encode_deltas(const Box& anchor, const Box& target);

// Sum over the four coordinates of SmoothL1(pred - target).
double smooth_l1(const BoxDeltas& pred, const BoxDeltas& target);

double iou(const Box& a, const Box& b);

// Clips to [0,width]x[0,height]; extents below min_size are widened back to
// min_size inside the image.
Box clip_box(const Box& b, double width, double height, double min_size = 1.0);

// Single-linkage agglomerative clustering of box centers, cut at `cutoff`
// pixels. Each cluster is replaced by the tight box enclosing its members.
std::vector<Box> cluster_merge_boxes(std::span<const Box> boxes, double cutoff);

// Greedy NMS in descending confidence (ties: lower source first), keeping at
// most m boxes whose pairwise IoU stays <= iou_threshold. The whole-image box
// is appended with confidence 1.
std::vector<ScoredBox> nms_select(std::span<const ScoredBox> proposals,
                                  std::size_t m, double iou_threshold,
                                  double image_w, double image_h);

Box whole_image_box(double image_w, double image_h);

}  // namespace rlsd

#endif  // RLSD_GEOMETRY_HPP_
