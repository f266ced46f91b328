// Copyright 2026 The xvlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xvlm/tinyvlm/config.hpp"
#include "xvlm/tinyvlm/model.hpp"

namespace xvlm::vlm {

// Binary container of named float64 arrays plus an embedded JSON header.
// Layout (all integers little-endian):
//
//   magic      8 bytes  "XVLMCKPT"
//   version    u32      1
//   json_len   u64
//   json       json_len bytes of UTF-8: {"model_config": {...}, "meta": {...}}
//   n_arrays   u32
//   per array:
//     name_len u16, name bytes
//     rows u64, cols u64
//     rows * cols float64 values, row-major
//
// Model parameters come first in Parameters::named() order; extra arrays
// (e.g. optimizer moments) follow under their own names.
struct Checkpoint {
  ModelConfig config;
  Parameters params;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Mat>> extras;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// SHA-256 over the serialized parameter arrays only.
std::string params_digest(const Parameters& params);

}  // namespace xvlm::vlm
