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

#include "xvlm/tinyvlm/config.hpp"

#include <string>

#include "xvlm/common.hpp"
#include "xvlm/tinyvlm/tokenizer.hpp"

namespace xvlm::vlm {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("model config: " + what);
}

}  // namespace

void ModelConfig::validate() const {
  require(image_size > 0 && patch_size > 0, "image_size and patch_size must be positive");
  require(image_size % patch_size == 0, "image_size must be divisible by patch_size");
  require(vision_dim > 0 && decoder_dim > 0, "dimensions must be positive");
  require(vision_layers >= 0 && decoder_layers >= 0, "layer counts must be non-negative");
  require(heads > 0, "heads must be positive");
  require(decoder_dim % heads == 0, "decoder_dim must be divisible by heads");
  require(vision_dim % heads == 0, "vision_dim must be divisible by heads");
  require(vocab_size > kNumSpecial, "vocab_size must leave room beyond the special tokens");
  require(max_seq_len > visual_tokens(), "max_seq_len must exceed the visual token count");
  require(mlp_ratio > 0, "mlp_ratio must be positive");
  require(init_std > 0.0, "init_std must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"image_size", c.image_size},       {"patch_size", c.patch_size},
                     {"vision_dim", c.vision_dim},       {"vision_layers", c.vision_layers},
                     {"decoder_dim", c.decoder_dim},     {"decoder_layers", c.decoder_layers},
                     {"heads", c.heads},                 {"vocab_size", c.vocab_size},
                     {"max_seq_len", c.max_seq_len},     {"mlp_ratio", c.mlp_ratio},
                     {"init_std", c.init_std},           {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  static const char* kKnown[] = {"image_size",  "patch_size",  "vision_dim", "vision_layers",
                                 "decoder_dim", "decoder_layers", "heads",   "vocab_size",
                                 "max_seq_len", "mlp_ratio",   "init_std",   "seed"};
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kKnown) known = known || key == k;
    if (!known) throw ConfigError("model config: unknown key '" + key + "'");
  }
  ModelConfig d;
  c.image_size = j.value("image_size", d.image_size);
  c.patch_size = j.value("patch_size", d.patch_size);
  c.vision_dim = j.value("vision_dim", d.vision_dim);
  c.vision_layers = j.value("vision_layers", d.vision_layers);
  c.decoder_dim = j.value("decoder_dim", d.decoder_dim);
  c.decoder_layers = j.value("decoder_layers", d.decoder_layers);
  c.heads = j.value("heads", d.heads);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.max_seq_len = j.value("max_seq_len", d.max_seq_len);
  c.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
  c.init_std = j.value("init_std", d.init_std);
  c.seed = j.value("seed", d.seed);
}

}  // namespace xvlm::vlm
