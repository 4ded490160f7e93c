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

#ifndef RLSD_CONFIG_HPP_
#define RLSD_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rlsd {

// Flat dotted-key configuration ("train.lr=1e-5"), one assignment per line.
// '#' starts a comment. Later assignments override earlier ones.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "config");
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  // Parses a single "key=value" override.
  void apply(const std::string& assignment);
  void merge(const Config& other);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key,
                               const std::vector<double>& fallback) const;

  // Sorted "key=value" lines.
  std::string text() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace rlsd

#endif  // RLSD_CONFIG_HPP_
