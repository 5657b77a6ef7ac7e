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

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "krdn/tensor.hpp"

namespace krdn::ad {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/**
 * Named-tensor binary container.
 *
 * Layout, all integers little-endian:
 *
 *   "KRDNTNSR"  u32 version  u64 count
 *   count x { u32 name_len, name bytes, u8 dtype (1 = f64), u32 rank,
 *             rank x u64 dim, row-major f64 payload }
 *
 * Entries are written in the order given and read back in the same order.
 */
void write_tensor_container(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors read_tensor_container(const std::filesystem::path& path);

}  // namespace krdn::ad
