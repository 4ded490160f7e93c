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

#include "rlsd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <stdexcept>

namespace rlsd {
namespace {

constexpr char kMagic[4] = {'R', 'L', 'S', 'D'};

template <typename T>
void put(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw std::runtime_error("checkpoint: " + msg + " at byte offset " +
                             std::to_string(pos_));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) fail(std::string("truncated while reading ") + what);
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ParamSet& params, const std::string& config_text) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const NamedTensor& nt : params.items()) {
    if (nt.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw std::invalid_argument("checkpoint: tensor name too long");
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(nt.name.size()));
    out += nt.name;
    const Shape& shape = nt.tensor.shape();
    put<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
    for (std::size_t d : shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : nt.tensor.data()) {
      put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config_text.size()));
  out += config_text;
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != std::string(kMagic, 4)) {
    throw std::runtime_error("checkpoint: bad magic (expected RLSD) at byte offset 0");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  Checkpoint ckpt;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>("name length");
    std::string name = r.take(len, "name");
    if (!names.insert(name).second) r.fail("duplicate tensor '" + name + "'");
    const auto rank = r.get<std::uint8_t>("rank");
    Shape shape;
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const auto dim = r.get<std::uint32_t>("dimension");
      if (dim == 0) r.fail("zero dimension in '" + name + "'");
      shape.push_back(dim);
      numel *= dim;
      if (numel > r.remaining()) r.fail("tensor '" + name + "' larger than file");
    }
    std::vector<double> values(numel);
    for (double& v : values) {
      v = static_cast<double>(std::bit_cast<float>(r.get<std::uint32_t>("tensor data")));
    }
    ckpt.tensors.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
  }
  const auto text_len = r.get<std::uint32_t>("config length");
  ckpt.config_text = r.take(text_len, "config text");
  if (r.remaining() != 0) r.fail("trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params,
                     const std::string& config_text) {
  const std::string bytes = encode_checkpoint(params, config_text);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  const std::string bytes(std::istreambuf_iterator<char>(in), {});
  try {
    return decode_checkpoint(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void restore_params(const Checkpoint& ckpt, const ParamSet& params) {
  ParamSet stored;
  for (const NamedTensor& nt : ckpt.tensors) stored.add(nt.name, nt.tensor);
  for (const NamedTensor& nt : params.items()) {
    if (stored.find(nt.name) == nullptr) {
      throw std::runtime_error("checkpoint lacks parameter '" + nt.name + "'");
    }
  }
  for (const NamedTensor& nt : stored.items()) {
    if (params.find(nt.name) == nullptr) {
      throw std::runtime_error("checkpoint tensor '" + nt.name +
                               "' does not belong to this model");
    }
  }
  params.copy_from(stored);
}

}  // namespace rlsd
