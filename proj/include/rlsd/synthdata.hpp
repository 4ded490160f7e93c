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

#ifndef RLSD_SYNTHDATA_HPP_
#define RLSD_SYNTHDATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rlsd/geometry.hpp"
#include "rlsd/tensor.hpp"

namespace rlsd {

inline constexpr const char* kDatasetFormat = "rlsd-ds/1";

enum class ShapeKind { kRectangle = 0, kCircle = 1, kTriangle = 2 };

struct SceneSpec {
  std::size_t image_size = 64;
  std::size_t num_classes = 12;
  std::vector<std::vector<double>> cooccurrence;  // L x L, symmetric
  std::vector<std::size_t> small_classes;
  std::size_t min_objects = 1;
  std::size_t max_objects = 4;
  // Box side ranges in pixels.
  double small_min = 8.0, small_max = 14.0;
  double large_min = 26.0, large_max = 34.0;
  double noise = 0.05;
  std::uint64_t seed = 1;

  // 12 classes (3 shapes x 4 hues), 4 small classes, paired co-occurrence.
  static SceneSpec desk(std::uint64_t seed = 1);
  void validate() const;
  bool is_small(std::size_t label) const;
  ShapeKind shape_of(std::size_t label) const;
  std::vector<std::string> class_names() const;
};

struct LabeledBox {
  std::size_t label = 0;
  Box box;
};

struct Sample {
  std::string id;
  Tensor image;                     // [3, H, W], values k/255
  std::vector<std::size_t> labels;  // sorted, unique
  std::vector<LabeledBox> boxes;

  std::vector<double> truth(std::size_t num_labels) const;
};

// Draws the label set and object placements of one scene.
std::vector<LabeledBox> sample_scene(const SceneSpec& spec, std::uint64_t seed);
// Rasterizes objects in order over seeded background noise.
Tensor render_scene(const std::vector<LabeledBox>& objects, const SceneSpec& spec,
                    std::uint64_t seed);
Sample generate_sample(const SceneSpec& spec, std::size_t index);

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<std::size_t> small_classes;
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::string spec_echo;  // generator config as JSON text

  std::size_t num_labels() const { return class_names.size(); }
  const std::vector<Sample>& split(const std::string& name) const;
};

Dataset generate_dataset(const SceneSpec& spec, std::size_t n_train,
                         std::size_t n_test);

// Binary P6, 8-bit.
void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_ppm(const std::filesystem::path& path);
std::string encode_annotation(const Sample& sample);
void write_sample(const std::filesystem::path& image_path,
                  const std::filesystem::path& annotation_path,
                  const Sample& sample);
Sample read_sample(const std::filesystem::path& image_path,
                   const std::filesystem::path& annotation_path,
                   std::size_t num_labels);

// Writes manifest.json, images/<id>.ppm and annotations/<id>.json.
void write_dataset(const std::filesystem::path& root, const Dataset& dataset,
                   const SceneSpec& spec);
Dataset load_dataset(const std::filesystem::path& root);

std::string spec_to_json(const SceneSpec& spec);

}  // namespace rlsd

#endif  // RLSD_SYNTHDATA_HPP_
