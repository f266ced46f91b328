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

#include "xvlm/policy.hpp"

#include <algorithm>

namespace xvlm {

vlm::TokenSequence prompt_sequence(const vlm::ModelConfig& config, const corpus::Sample& sample) {
  const auto& tok = vlm::default_tokenizer();
  vlm::TokenSequence seq;
  seq.ids.push_back(vlm::kBos);
  seq.ids.insert(seq.ids.end(), sample.images.size() * config.visual_tokens(), vlm::kImg);
  const auto p = tok.encode(sample.prompt);
  seq.ids.insert(seq.ids.end(), p.begin(), p.end());
  return seq;
}

vlm::TrainExample sft_example(const vlm::ModelConfig& config, const corpus::Sample& sample) {
  auto ex = vlm::build_example(config, vlm::default_tokenizer(), sample.prompt, sample.images,
                               corpus::training_target(sample));
  if (static_cast<int>(ex.sequence.ids.size()) > config.max_seq_len) {
    throw LengthError(sample.id + ": " + std::to_string(ex.sequence.ids.size()) + " tokens exceed max_seq_len " +
                      std::to_string(config.max_seq_len));
  }
  return ex;
}

size_t loss_tokens(const corpus::Sample& sample) {
  return vlm::default_tokenizer().encode(corpus::training_target(sample)).size() + 1;
}

vlm::Generation respond(const Policy& policy, const corpus::Sample& sample, const vlm::DecodeOptions& options) {
  const auto seq = prompt_sequence(policy.config, sample);
  const int room = policy.config.max_seq_len - static_cast<int>(seq.ids.size());
  if (room <= 0) {
    throw LengthError(sample.id + ": prompt fills the context window");
  }
  vlm::DecodeOptions capped = options;
  capped.max_new = std::min(options.max_new, room);
  return vlm::generate(policy.config, policy.params, vlm::default_tokenizer(), seq, sample.images, capped);
}

}  // namespace xvlm
