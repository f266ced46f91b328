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

#include <string>

#include "xvlm/synthcorpus/sample.hpp"
#include "xvlm/tinyvlm/model.hpp"

namespace xvlm {

// A model configuration paired with its weights.
struct Policy {
  vlm::ModelConfig config;
  vlm::Parameters params;
};

// BOS, the visual placeholders for every image, then the prompt tokens.
vlm::TokenSequence prompt_sequence(const vlm::ModelConfig& config, const corpus::Sample& sample);

// Supervised example whose loss span covers the training target plus EOS.
// Throws LengthError when the sequence exceeds max_seq_len.
vlm::TrainExample sft_example(const vlm::ModelConfig& config, const corpus::Sample& sample);

// Tokens contributing to the SFT loss for this sample.
size_t loss_tokens(const corpus::Sample& sample);

// Decodes a response. The new-token budget is capped by max_seq_len.
vlm::Generation respond(const Policy& policy, const corpus::Sample& sample, const vlm::DecodeOptions& options);

}  // namespace xvlm
