// Copyright 2026 The modafm Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "modafm/nn.hpp"

namespace modafm::nn {
namespace {

constexpr std::array<char, 8> kMagic = {'M', 'O', 'D', 'A', 'F', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::string& path) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw std::runtime_error("checkpoint '" + path + "': truncated file");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<ad::NodePtr>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint '" + path + "': cannot open for writing");
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    const std::string& name = p->name();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Shape& shape = p->value().shape();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) put_le<std::uint64_t>(out, d);
    for (double v : p->value().data()) put_le<double>(out, v);
  }
  if (!out) throw std::runtime_error("checkpoint '" + path + "': write failed");
}

std::vector<NamedTensor> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint '" + path + "': cannot open");
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw std::runtime_error("checkpoint '" + path + "': bad magic");
  }
  const auto version = get_le<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint '" + path + "': unsupported version " + std::to_string(version));
  }
  const auto count = get_le<std::uint64_t>(in, path);
  std::vector<NamedTensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = get_le<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw std::runtime_error("checkpoint '" + path + "': truncated name");
    const auto rank = get_le<std::uint32_t>(in, path);
    Shape shape(rank);
    for (auto& d : shape) d = get_le<std::uint64_t>(in, path);
    Tensor value(shape);
    for (double& v : value.data()) v = get_le<double>(in, path);
    out.push_back({std::move(name), std::move(value)});
  }
  return out;
}

void load_checkpoint(const std::string& path, const std::vector<ad::NodePtr>& params) {
  auto stored = read_checkpoint(path);
  if (stored.size() != params.size()) {
    throw std::runtime_error("checkpoint '" + path + "': holds " + std::to_string(stored.size()) +
                             " parameters, model has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (stored[i].name != params[i]->name() || stored[i].value.shape() != params[i]->value().shape()) {
      throw std::runtime_error("checkpoint '" + path + "': parameter " + std::to_string(i) + " is '" +
                               stored[i].name + "' " + shape_string(stored[i].value.shape()) + ", expected '" +
                               params[i]->name() + "' " + shape_string(params[i]->value().shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->mutable_value() = std::move(stored[i].value);
}

}  // namespace modafm::nn
