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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xvlm/policy.hpp"
#include "xvlm/rewards/rewards.hpp"
#include "xvlm/tinyvlm/optim.hpp"

namespace xvlm::grpo {

// How surrogate terms are averaged across the tokens of a batch of groups.
enum class TokenAveraging {
  kPerToken,     // every response token weighs the same
  kPerSequence,  // each response's tokens are averaged first
};

struct GrpoConfig {
  int group_size = 8;
  double clip_eps = 0.2;
  double kl_beta = 0.0;
  double temperature = 1.0;
  double learning_rate = 1e-5;
  double final_lr = 0.0;
  int steps = 200;
  int queries_per_step = 4;
  // Policy updates taken on each sampled batch; 1 keeps the ratio at 1.
  int updates_per_batch = 1;
  int max_new_tokens = 24;
  double advantage_eps = 1e-8;
  TokenAveraging averaging = TokenAveraging::kPerToken;
  vlm::AdamWConfig optimizer{0.9, 0.999, 1e-8, 0.0, 1.0};
  rewards::RewardConfig reward;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

void to_json(nlohmann::json& j, const GrpoConfig& c);
void from_json(const nlohmann::json& j, GrpoConfig& c);

// G sampled responses to one query. Per-response vectors share index i.
struct RolloutGroup {
  corpus::Sample query;
  vlm::TokenSequence prompt;
  std::vector<std::string> responses;
  std::vector<std::vector<int>> tokens;
  std::vector<std::vector<double>> old_logprobs;
  // Filled only when a reference policy is supplied.
  std::vector<std::vector<double>> ref_logprobs;
  std::vector<rewards::RewardBreakdown> breakdowns;
  std::vector<double> rewards;
  std::vector<double> advantages;

  int size() const { return static_cast<int>(responses.size()); }
};

// Per-token log-probabilities of `tokens` following `prompt` under the policy
// at the given sampling temperature.
std::vector<double> sequence_logprobs(const Policy& policy, const vlm::TokenSequence& prompt,
                                      std::span<const Image> images, std::span<const int> tokens,
                                      double temperature);

// Draws G responses with seeds derived from `seed`. Temperature 0 decodes
// greedily so every response is identical.
RolloutGroup sample_group(const Policy& policy, const corpus::Sample& query, int group_size, double temperature,
                          int max_new_tokens, std::uint64_t seed, const rewards::RewardConfig& reward,
                          const Policy* reference = nullptr);

// (r_i - mean) / sqrt(population variance + eps^2).
std::vector<double> group_advantages(std::span<const double> rewards, double eps);

struct SurrogateResult {
  double objective = 0.0;  // clipped surrogate minus the KL penalty; maximized
  vlm::Parameters grads;   // gradient of -objective
  size_t tokens = 0;
  double clip_fraction = 0.0;
  double kl = 0.0;  // mean per-token k3 estimate
};

// Clipped-ratio surrogate over every response token of every group. Groups
// must have advantages populated, and ref_logprobs when kl_beta > 0.
SurrogateResult surrogate_and_grads(const Policy& policy, std::span<const RolloutGroup> groups,
                                    const GrpoConfig& config);

struct StepStats {
  double objective = 0.0;
  double clip_fraction = 0.0;
  double kl = 0.0;
  double grad_norm = 0.0;
};

// One AdamW update on the surrogate. Throws Error on a non-finite objective.
StepStats grpo_step(Policy& policy, vlm::AdamW& optimizer, std::span<const RolloutGroup> groups,
                    const GrpoConfig& config, double lr);

struct RlRecord {
  int step = 0;
  double lr = 0.0;
  double mean_reward = 0.0;
  double reward_std = 0.0;
  double mean_task = 0.0;
  double format_rate = 0.0;
  double clip_fraction = 0.0;
  double kl = 0.0;
  double wall_seconds = 0.0;
};

void to_json(nlohmann::json& j, const RlRecord& r);

struct RlResult {
  Policy policy;
  std::vector<RlRecord> log;
};

using RlCallback = std::function<void(const RlRecord&)>;

// Samples queries_per_step queries per step from the corpus, normalizes
// rewards within each group and applies grpo_step. The starting policy is the
// frozen reference for the KL term.
RlResult run_rl(const Policy& initial, std::span<const corpus::Sample> rl_corpus, const GrpoConfig& config,
                const RlCallback& on_step = {});

}  // namespace xvlm::grpo
