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

#ifndef RLSD_CHECKPOINT_HPP_
#define RLSD_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rlsd/params.hpp"

namespace rlsd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian): "RLSD", u32 version, u32 tensor count, then per
// tensor u16 name length, name bytes, u8 rank, u32 dims, f32 values; then a
// u32-length-prefixed config text blob.
struct Checkpoint {
  std::vector<NamedTensor> tensors;
  std::string config_text;
};

std::string encode_checkpoint(const ParamSet& params, const std::string& config_text);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params,
                     const std::string& config_text);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies stored values into `params`. Every parameter must be present with a
// matching shape and no stored tensor may be left unused.
void restore_params(const Checkpoint& ckpt, const ParamSet& params);

}  // namespace rlsd

#endif  // RLSD_CHECKPOINT_HPP_
