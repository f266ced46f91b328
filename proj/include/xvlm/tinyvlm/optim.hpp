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
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xvlm/tinyvlm/model.hpp"

namespace xvlm::vlm {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  // Global L2 norm cap on the gradient; 0 disables clipping.
  double grad_clip = 1.0;

  bool operator==(const AdamWConfig&) const = default;
};

void to_json(nlohmann::json& j, const AdamWConfig& c);
void from_json(const nlohmann::json& j, AdamWConfig& c);

// Decoupled weight decay applies to projection matrices and the output head
// only; embeddings, positional tables, biases and norms are never decayed.
bool decays(const std::string& param_name);

double global_norm(const Parameters& grads);

// Half-cosine decay from base at step 0 to final at max_steps.
// Throws ArgumentError when max_steps is 0 or step lies outside [0, max_steps].
double cosine_lr(long step, long max_steps, double base, double final);

class AdamW {
 public:
  AdamW(const ModelConfig& config, AdamWConfig options);

  // One update at learning rate lr. Returns the pre-clip gradient norm.
  double step(Parameters& params, const Parameters& grads, double lr);

  void reset();
  long steps() const { return t_; }
  const AdamWConfig& options() const { return options_; }

  // Moments as named arrays ("adam.m.<name>", "adam.v.<name>") plus the step
  // counter, for checkpoint extras.
  std::vector<std::pair<std::string, Mat>> export_state() const;
  void import_state(const std::vector<std::pair<std::string, Mat>>& extras);

 private:
  AdamWConfig options_;
  Parameters m_;
  Parameters v_;
  long t_ = 0;
};

}  // namespace xvlm::vlm
