/*
 * Copyright 2026 The krdn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "krdn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "krdn/error.hpp"

namespace krdn::ad {

namespace {

constexpr char kMagic[8] = {'K', 'R', 'D', 'N', 'T', 'N', 'S', 'R'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 1;

template <typename T>
void put(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& source) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw ParseError(source, 0, "truncated tensor container");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

void write_tensor_container(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint8_t>(out, kDtypeF64);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.values()) put<double>(out, v);
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

NamedTensors read_tensor_container(const std::filesystem::path& path) {
  const std::string source = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + source + "'");
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw ParseError(source, 0, "not a tensor container");
  }
  if (get<std::uint32_t>(in, source) != kVersion) {
    throw ParseError(source, 0, "unsupported container version");
  }
  const auto count = get<std::uint64_t>(in, source);
  NamedTensors out;
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto len = get<std::uint32_t>(in, source);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw ParseError(source, 0, "truncated tensor name");
    if (get<std::uint8_t>(in, source) != kDtypeF64) {
      throw ParseError(source, 0, "tensor '" + name + "': unsupported dtype");
    }
    const auto rank = get<std::uint32_t>(in, source);
    if (rank > 2) throw ParseError(source, 0, "tensor '" + name + "': rank > 2");
    Tensor::Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in, source);
    Tensor t(shape);
    for (double& v : t.values()) v = get<double>(in, source);
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace krdn::ad
