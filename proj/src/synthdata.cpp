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

#include "rlsd/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "rlsd/rng.hpp"

namespace rlsd {
namespace {

using json = nlohmann::json;

constexpr double kHues[4][3] = {
    {0.85, 0.15, 0.15},  // red
    {0.15, 0.75, 0.20},  // green
    {0.20, 0.30, 0.90},  // blue
    {0.90, 0.80, 0.15},  // yellow
};
constexpr const char* kHueNames[4] = {"red", "green", "blue", "yellow"};
constexpr const char* kShapeNames[3] = {"rectangle", "circle", "triangle"};
constexpr double kBackground = 0.45;

std::string sample_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

double max_iou(const Box& b, const std::vector<LabeledBox>& placed, bool small_only,
               const SceneSpec& spec) {
  double worst = 0.0;
  for (const LabeledBox& p : placed) {
    if (small_only && !spec.is_small(p.label)) continue;
    worst = std::max(worst, iou(b, p.box));
  }
  return worst;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

SceneSpec SceneSpec::desk(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  s.small_classes = {1, 5, 6, 10};
  const std::size_t l = s.num_classes;
  s.cooccurrence.assign(l, std::vector<double>(l, 0.05));
  auto pair = [&s](std::size_t a, std::size_t b, double q) {
    s.cooccurrence[a][b] = s.cooccurrence[b][a] = q;
  };
  // Each small class travels with a large partner of another hue.
  pair(1, 3, 0.6);
  pair(5, 7, 0.6);
  pair(6, 9, 0.6);
  pair(10, 0, 0.6);
  pair(2, 4, 0.4);
  pair(8, 11, 0.4);
  for (std::size_t i = 0; i < l; ++i) s.cooccurrence[i][i] = 1.0;
  return s;
}

void SceneSpec::validate() const {
  const std::size_t l = num_classes;
  if (l == 0) throw std::invalid_argument("scene spec: no classes");
  if (l > 12) {
    throw std::invalid_argument("scene spec: at most 12 shape x hue classes, got " +
                                std::to_string(l));
  }
  if (cooccurrence.size() != l) {
    throw std::invalid_argument("scene spec: co-occurrence matrix must be " +
                                std::to_string(l) + "x" + std::to_string(l));
  }
  for (std::size_t i = 0; i < l; ++i) {
    if (cooccurrence[i].size() != l) {
      throw std::invalid_argument("scene spec: co-occurrence row " +
                                  std::to_string(i) + " has wrong length");
    }
    if (cooccurrence[i][i] != 1.0) {
      throw std::invalid_argument("scene spec: co-occurrence diagonal must be 1");
    }
    for (std::size_t j = 0; j < l; ++j) {
      const double q = cooccurrence[i][j];
      if (!(q >= 0.0 && q <= 1.0) || q != cooccurrence[j][i]) {
        throw std::invalid_argument("scene spec: co-occurrence must be symmetric "
                                    "with entries in [0,1]");
      }
    }
  }
  if (small_classes.empty()) {
    throw std::invalid_argument("scene spec: need at least one small-object class");
  }
  for (std::size_t c : small_classes) {
    if (c >= l) throw std::invalid_argument("scene spec: small class out of range");
  }
  if (min_objects < 1 || max_objects < min_objects || max_objects > l) {
    throw std::invalid_argument("scene spec: invalid objects-per-image range");
  }
  const double size = static_cast<double>(image_size);
  const double area = size * size;
  if (!(small_min >= 1.0 && small_min <= small_max && large_min <= large_max)) {
    throw std::invalid_argument("scene spec: invalid size bands");
  }
  if (large_max > size || small_max > size) {
    throw std::invalid_argument(
        "scene spec: objects up to " + std::to_string(large_max) +
        " px cannot be placed in a " + std::to_string(image_size) + " px image");
  }
  if (small_max * small_max >= 0.10 * area) {
    throw std::invalid_argument("scene spec: small objects must cover < 10% of the image");
  }
  if (large_min * large_min < 0.15 * area) {
    throw std::invalid_argument("scene spec: large objects must cover >= 15% of the image");
  }
  if (!(noise >= 0.0 && noise < 0.5)) {
    throw std::invalid_argument("scene spec: noise amplitude out of range");
  }
}

bool SceneSpec::is_small(std::size_t label) const {
  return std::find(small_classes.begin(), small_classes.end(), label) !=
         small_classes.end();
}

ShapeKind SceneSpec::shape_of(std::size_t label) const {
  return static_cast<ShapeKind>(label % 3);
}

std::vector<std::string> SceneSpec::class_names() const {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < num_classes; ++c) {
    names.push_back(std::string(kHueNames[c / 3]) + "-" + kShapeNames[c % 3]);
  }
  return names;
}

std::vector<double> Sample::truth(std::size_t num_labels) const {
  std::vector<double> y(num_labels, 0.0);
  for (std::size_t l : labels) y.at(l) = 1.0;
  return y;
}

std::vector<LabeledBox> sample_scene(const SceneSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t l = spec.num_classes;
  const std::size_t anchor = rng.index(l);
  std::vector<std::size_t> extra;
  for (std::size_t j = 0; j < l; ++j) {
    if (j == anchor) continue;
    if (rng.bernoulli(spec.cooccurrence[anchor][j])) extra.push_back(j);
  }
  if (extra.size() + 1 > spec.max_objects) {
    rng.shuffle(extra);
    extra.resize(spec.max_objects - 1);
  }
  while (extra.size() + 1 < spec.min_objects) {
    const std::size_t j = rng.index(l);
    if (j != anchor && std::find(extra.begin(), extra.end(), j) == extra.end()) {
      extra.push_back(j);
    }
  }
  std::vector<std::size_t> labels = extra;
  labels.push_back(anchor);
  // Large objects first so small ones are drawn on top.
  std::sort(labels.begin(), labels.end(), [&spec](std::size_t a, std::size_t b) {
    const bool sa = spec.is_small(a), sb = spec.is_small(b);
    return sa != sb ? sb : a < b;
  });

  const double size = static_cast<double>(spec.image_size);
  std::vector<LabeledBox> placed;
  for (std::size_t label : labels) {
    const bool small = spec.is_small(label);
    const double lo = small ? spec.small_min : spec.large_min;
    const double hi = small ? spec.small_max : spec.large_max;
    const double w = std::floor(rng.uniform(lo, hi + 1.0));
    const double h = spec.shape_of(label) == ShapeKind::kRectangle
                         ? std::floor(rng.uniform(lo, hi + 1.0))
                         : w;
    const double bw = std::min(w, hi), bh = std::min(h, hi);

    const LabeledBox* partner = nullptr;
    if (small) {
      double best_q = 0.3;
      for (const LabeledBox& p : placed) {
        if (!spec.is_small(p.label) && spec.cooccurrence[label][p.label] >= best_q) {
          best_q = spec.cooccurrence[label][p.label];
          partner = &p;
        }
      }
    }
    Box best;
    double best_overlap = 2.0;
    for (int attempt = 0; attempt < 30 && best_overlap > 0.0; ++attempt) {
      double x0, y0;
      if (partner != nullptr) {
        const double cx = rng.uniform(partner->box.left(), partner->box.right());
        const double cy = rng.uniform(partner->box.top(), partner->box.bottom());
        x0 = std::clamp(std::round(cx - 0.5 * bw), 0.0, size - bw);
        y0 = std::clamp(std::round(cy - 0.5 * bh), 0.0, size - bh);
      } else {
        x0 = std::floor(rng.uniform(0.0, size - bw + 1.0));
        y0 = std::floor(rng.uniform(0.0, size - bh + 1.0));
      }
      const Box cand = Box::from_corners(x0, y0, x0 + bw, y0 + bh);
      // Small objects only avoid each other; large ones avoid every object.
      const double overlap = max_iou(cand, placed, small, spec);
      const double limit = small ? 0.0 : 0.25;
      const double score = std::max(0.0, overlap - limit);
      if (score < best_overlap) {
        best_overlap = score;
        best = cand;
      }
    }
    placed.push_back(LabeledBox{label, best});
  }
  return placed;
}

Tensor render_scene(const std::vector<LabeledBox>& objects, const SceneSpec& spec,
                    std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = spec.image_size;
  Tensor image = Tensor::zeros({3, n, n});
  auto px = image.data();
  for (double& v : px) v = kBackground + spec.noise * (2.0 * rng.uniform() - 1.0);
  for (const LabeledBox& obj : objects) {
    const Box& b = obj.box;
    const double* color = kHues[(obj.label / 3) % 4];
    const ShapeKind kind = spec.shape_of(obj.label);
    for (std::size_t y = 0; y < n; ++y) {
      const double cy = static_cast<double>(y) + 0.5;
      if (cy < b.top() || cy > b.bottom()) continue;
      for (std::size_t x = 0; x < n; ++x) {
        const double cx = static_cast<double>(x) + 0.5;
        if (cx < b.left() || cx > b.right()) continue;
        bool inside = true;
        if (kind == ShapeKind::kCircle) {
          const double dx = (cx - b.x) / (0.5 * b.w), dy = (cy - b.y) / (0.5 * b.h);
          inside = dx * dx + dy * dy <= 1.0;
        } else if (kind == ShapeKind::kTriangle) {
          inside = std::abs(cx - b.x) <= 0.5 * b.w * (cy - b.top()) / b.h;
        }
        if (!inside) continue;
        for (std::size_t c = 0; c < 3; ++c) px[(c * n + y) * n + x] = color[c];
      }
    }
  }
  for (double& v : px) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  return image;
}

Sample generate_sample(const SceneSpec& spec, std::size_t index) {
  const std::uint64_t s = Rng::derive(spec.seed, index);
  Sample sample;
  sample.id = sample_id(index);
  sample.boxes = sample_scene(spec, Rng::derive(s, 0));
  sample.image = render_scene(sample.boxes, spec, Rng::derive(s, 1));
  for (const LabeledBox& b : sample.boxes) sample.labels.push_back(b.label);
  std::sort(sample.labels.begin(), sample.labels.end());
  sample.labels.erase(std::unique(sample.labels.begin(), sample.labels.end()),
                      sample.labels.end());
  return sample;
}

const std::vector<Sample>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split '" + name + "' (expected train or test)");
}

Dataset generate_dataset(const SceneSpec& spec, std::size_t n_train,
                         std::size_t n_test) {
  spec.validate();
  if (n_train == 0 || n_test == 0) {
    throw std::invalid_argument("generate_dataset: both splits need >= 1 sample");
  }
  Dataset ds;
  ds.class_names = spec.class_names();
  ds.small_classes = spec.small_classes;
  ds.spec_echo = spec_to_json(spec);
  for (std::size_t i = 0; i < n_train; ++i) ds.train.push_back(generate_sample(spec, i));
  for (std::size_t i = 0; i < n_test; ++i) {
    ds.test.push_back(generate_sample(spec, n_train + i));
  }
  return ds;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw std::invalid_argument("write_ppm: need [3,H,W], got " +
                                shape_str(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::string bytes = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const std::size_t header = bytes.size();
  bytes.resize(header + 3 * w * h);
  const auto d = image.data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::round(std::clamp(d[(c * h + y) * w + x], 0.0, 1.0) * 255.0);
        bytes[header + (y * w + x) * 3 + c] = static_cast<char>(static_cast<unsigned char>(v));
      }
    }
  }
  write_file(path, bytes);
}

Tensor read_ppm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  auto fail = [&](const std::string& what) -> std::runtime_error {
    return std::runtime_error(path.string() + ": " + what + " at byte offset " +
                              std::to_string(pos));
  };
  auto skip_space = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw fail("expected a decimal number");
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > 1u << 20) throw fail("header value too large");
      ++pos;
    }
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw fail("missing P6 magic");
  }
  pos = 2;
  const std::size_t w = number();
  const std::size_t h = number();
  const std::size_t maxval = number();
  if (w == 0 || h == 0) throw fail("zero image dimension");
  if (maxval != 255) throw fail("only 8-bit PPM (max value 255) is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw fail("expected whitespace after header");
  }
  ++pos;
  const std::size_t need = 3 * w * h;
  if (bytes.size() - pos < need) {
    pos = bytes.size();
    throw fail("truncated pixel data (expected " + std::to_string(need) + " bytes)");
  }
  Tensor image = Tensor::zeros({3, h, w});
  auto d = image.data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        d[(c * h + y) * w + x] =
            static_cast<unsigned char>(bytes[pos + (y * w + x) * 3 + c]) / 255.0;
      }
    }
  }
  return image;
}

std::string encode_annotation(const Sample& sample) {
  json boxes = json::array();
  for (const LabeledBox& b : sample.boxes) {
    boxes.push_back(json{{"label", b.label},
                         {"x", b.box.x},
                         {"y", b.box.y},
                         {"w", b.box.w},
                         {"h", b.box.h}});
  }
  json rec = {{"labels", sample.labels}, {"boxes", boxes}};
  return rec.dump() + "\n";
}

void write_sample(const std::filesystem::path& image_path,
                  const std::filesystem::path& annotation_path,
                  const Sample& sample) {
  write_ppm(image_path, sample.image);
  write_file(annotation_path, encode_annotation(sample));
}

Sample read_sample(const std::filesystem::path& image_path,
                   const std::filesystem::path& annotation_path,
                   std::size_t num_labels) {
  Sample s;
  s.id = image_path.stem().string();
  s.image = read_ppm(image_path);
  json rec;
  try {
    rec = json::parse(read_file(annotation_path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(annotation_path.string() + ": malformed annotation at byte " +
                             std::to_string(e.byte) + ": " + e.what());
  }
  auto bad = [&](const std::string& what) {
    return std::runtime_error(annotation_path.string() + ": " + what);
  };
  if (!rec.is_object() || !rec.contains("labels") || !rec["labels"].is_array()) {
    throw bad("missing 'labels' array");
  }
  for (const json& l : rec["labels"]) {
    if (!l.is_number_unsigned()) throw bad("label ids must be non-negative integers");
    const std::size_t id = l.get<std::size_t>();
    if (id >= num_labels) {
      throw bad("label " + std::to_string(id) + " outside vocabulary of " +
                std::to_string(num_labels));
    }
    s.labels.push_back(id);
  }
  if (rec.contains("boxes")) {
    if (!rec["boxes"].is_array()) throw bad("'boxes' must be an array");
    for (std::size_t i = 0; i < rec["boxes"].size(); ++i) {
      const json& b = rec["boxes"][i];
      for (const char* key : {"label", "x", "y", "w", "h"}) {
        if (!b.contains(key) || !b[key].is_number()) {
          throw bad("box " + std::to_string(i) + " lacks numeric '" + key + "'");
        }
      }
      if (!b["label"].is_number_unsigned()) {
        throw bad("box " + std::to_string(i) + " has a non-integer label");
      }
      LabeledBox lb{b["label"].get<std::size_t>(),
                    Box{b["x"].get<double>(), b["y"].get<double>(),
                        b["w"].get<double>(), b["h"].get<double>()}};
      if (lb.label >= num_labels) {
        throw bad("box " + std::to_string(i) + " label " + std::to_string(lb.label) +
                  " outside vocabulary of " + std::to_string(num_labels));
      }
      if (!(lb.box.w > 0.0 && lb.box.h > 0.0)) {
        throw bad("box " + std::to_string(i) + " has non-positive extent");
      }
      s.boxes.push_back(lb);
    }
  }
  return s;
}

std::string spec_to_json(const SceneSpec& spec) {
  json j = {{"image_size", spec.image_size},
            {"num_classes", spec.num_classes},
            {"cooccurrence", spec.cooccurrence},
            {"small_classes", spec.small_classes},
            {"min_objects", spec.min_objects},
            {"max_objects", spec.max_objects},
            {"small_size", {spec.small_min, spec.small_max}},
            {"large_size", {spec.large_min, spec.large_max}},
            {"noise", spec.noise},
            {"seed", spec.seed}};
  return j.dump();
}

void write_dataset(const std::filesystem::path& root, const Dataset& dataset,
                   const SceneSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "images");
  fs::create_directories(root / "annotations");
  json splits = json::object();
  for (const char* name : {"train", "test"}) {
    json ids = json::array();
    for (const Sample& s : dataset.split(name)) {
      write_sample(root / "images" / (s.id + ".ppm"),
                   root / "annotations" / (s.id + ".json"), s);
      ids.push_back(s.id);
    }
    splits[name] = ids;
  }
  json manifest = {{"format", kDatasetFormat},
                   {"classes", dataset.class_names},
                   {"small_classes", dataset.small_classes},
                   {"splits", splits},
                   {"generator", json::parse(spec_to_json(spec))}};
  write_file(root / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& root) {
  const auto manifest_path = root / "manifest.json";
  json m;
  try {
    m = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(manifest_path.string() + ": malformed manifest at byte " +
                             std::to_string(e.byte));
  }
  if (!m.contains("format") || m["format"] != kDatasetFormat) {
    throw std::runtime_error(manifest_path.string() + ": unsupported format (expected " +
                             kDatasetFormat + ")");
  }
  Dataset ds;
  ds.class_names = m.at("classes").get<std::vector<std::string>>();
  if (m.contains("small_classes")) {
    ds.small_classes = m["small_classes"].get<std::vector<std::size_t>>();
  }
  if (m.contains("generator")) ds.spec_echo = m["generator"].dump();
  std::vector<std::string> seen;
  for (const char* name : {"train", "test"}) {
    auto& out = std::string(name) == "train" ? ds.train : ds.test;
    for (const std::string id : m.at("splits").at(name)) {
      seen.push_back(id);
      const auto img = root / "images" / (id + ".ppm");
      const auto ann = root / "annotations" / (id + ".json");
      if (!std::filesystem::exists(img) || !std::filesystem::exists(ann)) {
        throw std::runtime_error("manifest references missing sample '" + id + "'");
      }
      Sample s = read_sample(img, ann, ds.class_names.size());
      if (s.labels.empty()) continue;  // unlabeled samples are dropped
      out.push_back(std::move(s));
    }
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw std::runtime_error(manifest_path.string() + ": splits are not disjoint");
  }
  return ds;
}

}  // namespace rlsd
