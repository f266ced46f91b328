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
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xvlm/grpo/grpo.hpp"
#include "xvlm/policy.hpp"
#include "xvlm/rng.hpp"
#include "xvlm/tinyvlm/checkpoint.hpp"
#include "xvlm/tinyvlm/optim.hpp"

namespace xvlm::curriculum {

using vlm::cosine_lr;

// Corpus name -> samples.
using Registry = std::map<std::string, std::vector<corpus::Sample>>;

// Corpus groups accumulated stage by stage.
const std::vector<std::string>& general_corpora();
const std::vector<std::string>& embodied_corpora();
const std::vector<std::string>& driving_corpora();
inline constexpr const char* kCotCorpus = "cot";
inline constexpr const char* kRlCorpus = "rl";

struct MixtureEntry {
  std::string corpus;
  double weight = 1.0;
  bool operator==(const MixtureEntry&) const = default;
};

struct StageConfig {
  int stage_id = 1;
  std::vector<MixtureEntry> mixture;
  int batch_size = 16;
  double learning_rate = 3e-4;  // cosine base
  double final_lr = 3e-5;       // cosine floor
  double weight_decay = 0.05;
  int max_steps = 1000;
  // When positive, the stage ends once this many loss tokens have been
  // consumed and the schedule advances with tokens rather than steps.
  long token_budget = 0;
  int max_sequence_length = 256;
  vlm::AdamWConfig optimizer;  // weight_decay here is overridden by the field above
  bool reset_optimizer = true;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const StageConfig&) const = default;
};

void to_json(nlohmann::json& j, const MixtureEntry& m);
void from_json(const nlohmann::json& j, MixtureEntry& m);
void to_json(nlohmann::json& j, const StageConfig& c);
void from_json(const nlohmann::json& j, StageConfig& c);

std::string stage_digest(const StageConfig& config);

// Corpus sets prescribed for each stage: 1 general + embodied, 2 adds driving,
// 3 adds CoT, 4 is RL prompts only. Weights are uniform.
std::vector<MixtureEntry> default_mixture(int stage_id);

// Validated sampling plan. Throws ConfigError when the registry lacks a corpus
// or a mixture weight is not positive.
struct SamplingPlan {
  int stage_id = 0;
  std::vector<MixtureEntry> entries;

  std::vector<std::string> corpora() const;
};

SamplingPlan build_mixture(int stage_id, const Registry& registry);
SamplingPlan build_mixture(const StageConfig& stage, const Registry& registry);

// Draws samples corpus-first by weight, then walks a per-corpus permutation
// that is reshuffled after each pass.
class MixtureSampler {
 public:
  MixtureSampler(const SamplingPlan& plan, const Registry& registry, std::uint64_t seed);

  const corpus::Sample& next();
  const std::string& last_corpus() const { return plan_.entries[last_].corpus; }

 private:
  SamplingPlan plan_;
  std::vector<const std::vector<corpus::Sample>*> sources_;
  std::vector<double> cumulative_;
  std::vector<std::vector<size_t>> order_;
  std::vector<size_t> cursor_;
  Rng rng_;
  size_t last_ = 0;
};

struct TrainState {
  Policy policy;
  long step = 0;  // global optimizer steps across stages
  std::uint64_t seed = 0;
  int last_stage = 0;
  std::vector<std::string> history;  // stage digests, append-only
  std::vector<std::pair<std::string, Mat>> optimizer_state;
  long loss_tokens = 0;
  // Caller-owned annotations carried through checkpoints.
  nlohmann::json tags = nlohmann::json::object();

  static TrainState fresh(const vlm::ModelConfig& config, std::uint64_t seed);
};

vlm::Checkpoint to_checkpoint(const TrainState& state);
TrainState from_checkpoint(const vlm::Checkpoint& checkpoint);

struct StepRecord {
  int stage = 0;
  long step = 0;  // step within the stage
  double loss = 0.0;
  double lr = 0.0;
  long tokens = 0;
  double grad_norm = 0.0;
  double wall_seconds = 0.0;
};

void to_json(nlohmann::json& j, const StepRecord& r);

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<grpo::RlRecord> rl;
  std::vector<nlohmann::json> snapshots;

  void append(const RunLog& other);
  // JSON-Lines: one object per step record (type "sft" or "rl") then snapshots.
  std::string to_jsonl() const;
};

struct StageHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const grpo::RlRecord&)> on_rl_step;
  // Called after each completed stage; its return value is logged as a snapshot.
  std::function<nlohmann::json(int stage, const TrainState&)> evaluate;
};

// Runs one supervised stage. Stage 4 is rejected here; see run_pipeline.
// Throws SequencingError unless stage_id == state.last_stage + 1.
std::pair<TrainState, RunLog> run_stage(TrainState state, const StageConfig& stage, const Registry& registry,
                                        const StageHooks& hooks = {});

struct PipelineConfig {
  vlm::ModelConfig model;
  std::vector<StageConfig> stages;
  grpo::GrpoConfig grpo;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

struct PipelineResult {
  TrainState state;
  RunLog log;
};

// Runs the given stages in order from `start` (a fresh state by default).
// Stage 4 hands off to grpo::run_rl with the stage's learning rate and batch
// size overriding the GRPO config. When checkpoint_dir is set, stage{k}.ckpt
// is written after each stage. Failures are rethrown as the same exception
// type with the stage number prefixed.
PipelineResult run_pipeline(const PipelineConfig& config, const Registry& registry,
                            const std::optional<TrainState>& start = std::nullopt,
                            const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt,
                            const StageHooks& hooks = {});

// Reference-scale hyperparameters for the four stages.
std::vector<StageConfig> paper_profile_stages();

// Toy-scale default stages.
std::vector<StageConfig> default_stages();

// Loss tokens a step-bounded stage consumes, found by replaying its sampler
// with the seed run_stage would derive from `seed`.
long measure_tokens(const StageConfig& stage, const Registry& registry, std::uint64_t seed);

}  // namespace xvlm::curriculum
