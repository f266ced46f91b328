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

#include <cstdint>

#include <nlohmann/json.hpp>

namespace xvlm::vlm {

// Shape-defining hyperparameters. Every parameter and activation shape is a
// function of this struct alone.
struct ModelConfig {
  int image_size = 32;
  int patch_size = 8;
  int vision_dim = 64;
  int vision_layers = 2;
  int decoder_dim = 128;
  int decoder_layers = 4;
  int heads = 4;
  int vocab_size = 512;
  int max_seq_len = 256;
  int mlp_ratio = 4;
  double init_std = 0.02;
  std::uint64_t seed = 0;

  int patches_per_side() const { return image_size / patch_size; }
  int visual_tokens() const { return patches_per_side() * patches_per_side(); }
  int patch_features() const { return patch_size * patch_size * 3; }

  // Throws ConfigError on any violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace xvlm::vlm
