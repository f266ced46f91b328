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

#include "xvlm/curriculum/curriculum.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace xvlm::curriculum {

const std::vector<std::string>& general_corpora() {
  static const std::vector<std::string> v{"general"};
  return v;
}

const std::vector<std::string>& embodied_corpora() {
  static const std::vector<std::string> v{"embodied_affordance", "embodied_spatial", "embodied_planning"};
  return v;
}

const std::vector<std::string>& driving_corpora() {
  static const std::vector<std::string> v{"drive_perception", "drive_prediction", "drive_planning"};
  return v;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

std::set<std::string> names_of(const std::vector<MixtureEntry>& m) {
  std::set<std::string> out;
  for (const auto& e : m) out.insert(e.corpus);
  return out;
}

}  // namespace

void StageConfig::validate() const {
  const std::string where = "stage " + std::to_string(stage_id) + ": ";
  require(stage_id >= 1 && stage_id <= 4, where + "stage_id must be 1..4");
  require(!mixture.empty(), where + "mixture is empty");
  for (const auto& e : mixture) require(e.weight > 0 && std::isfinite(e.weight), where + "weights must be positive");
  require(names_of(mixture).size() == mixture.size(), where + "mixture lists a corpus twice");
  require(batch_size > 0, where + "batch_size must be positive");
  require(learning_rate > 0, where + "learning_rate must be positive");
  require(final_lr >= 0, where + "final_lr must be non-negative");
  require(weight_decay >= 0, where + "weight_decay must be non-negative");
  require(max_steps >= 0, where + "max_steps must be non-negative");
  require(token_budget >= 0, where + "token_budget must be non-negative");
  require(max_sequence_length > 0, where + "max_sequence_length must be positive");
}

void to_json(nlohmann::json& j, const MixtureEntry& m) { j = nlohmann::json{{"corpus", m.corpus}, {"weight", m.weight}}; }

void from_json(const nlohmann::json& j, MixtureEntry& m) {
  if (j.is_string()) {
    m = {j.get<std::string>(), 1.0};
    return;
  }
  if (!j.is_object()) throw ConfigError("mixture entry must be a string or object");
  for (const auto& [key, value] : j.items()) {
    if (key == "corpus") {
      m.corpus = value.get<std::string>();
    } else if (key == "weight") {
      m.weight = value.get<double>();
    } else {
      throw ConfigError("unknown mixture key: " + key);
    }
  }
  if (m.corpus.empty()) throw ConfigError("mixture entry needs a corpus");
}

void to_json(nlohmann::json& j, const StageConfig& c) {
  j = nlohmann::json{{"stage_id", c.stage_id},
                     {"mixture", c.mixture},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"final_lr", c.final_lr},
                     {"weight_decay", c.weight_decay},
                     {"schedule", "cosine"},
                     {"max_steps", c.max_steps},
                     {"token_budget", c.token_budget},
                     {"max_sequence_length", c.max_sequence_length},
                     {"optimizer", c.optimizer},
                     {"reset_optimizer", c.reset_optimizer}};
}

void from_json(const nlohmann::json& j, StageConfig& c) {
  if (!j.is_object()) throw ConfigError("stage config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "stage_id") {
      c.stage_id = value.get<int>();
    } else if (key == "mixture") {
      c.mixture = value.get<std::vector<MixtureEntry>>();
    } else if (key == "batch_size") {
      c.batch_size = value.get<int>();
    } else if (key == "learning_rate") {
      c.learning_rate = value.get<double>();
    } else if (key == "final_lr") {
      c.final_lr = value.get<double>();
    } else if (key == "weight_decay") {
      c.weight_decay = value.get<double>();
    } else if (key == "schedule") {
      if (value.get<std::string>() != "cosine") throw ConfigError("only the cosine schedule is supported");
    } else if (key == "max_steps") {
      c.max_steps = value.get<int>();
    } else if (key == "token_budget") {
      c.token_budget = value.get<long>();
    } else if (key == "max_sequence_length") {
      c.max_sequence_length = value.get<int>();
    } else if (key == "optimizer") {
      c.optimizer = value.get<vlm::AdamWConfig>();
    } else if (key == "reset_optimizer") {
      c.reset_optimizer = value.get<bool>();
    } else {
      throw ConfigError("unknown stage key: " + key);
    }
  }
  if (c.mixture.empty() && c.stage_id >= 1 && c.stage_id <= 4) c.mixture = default_mixture(c.stage_id);
  c.validate();
}

std::string stage_digest(const StageConfig& config) { return sha256_hex(nlohmann::json(config).dump()); }

std::vector<MixtureEntry> default_mixture(int stage_id) {
  std::vector<std::string> names;
  auto add = [&](const std::vector<std::string>& v) { names.insert(names.end(), v.begin(), v.end()); };
  switch (stage_id) {
    case 3:
      names.push_back(kCotCorpus);
      [[fallthrough]];
    case 2:
      add(driving_corpora());
      [[fallthrough]];
    case 1:
      add(general_corpora());
      add(embodied_corpora());
      break;
    case 4:
      names.push_back(kRlCorpus);
      break;
    default:
      throw ConfigError("no stage " + std::to_string(stage_id));
  }
  std::sort(names.begin(), names.end());
  std::vector<MixtureEntry> out;
  for (auto& n : names) out.push_back({n, 1.0});
  return out;
}

std::vector<std::string> SamplingPlan::corpora() const {
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.corpus);
  return out;
}

SamplingPlan build_mixture(const StageConfig& stage, const Registry& registry) {
  SamplingPlan plan{stage.stage_id, stage.mixture};
  if (plan.entries.empty()) throw ConfigError("stage " + std::to_string(stage.stage_id) + ": empty mixture");
  for (const auto& e : plan.entries) {
    if (!(e.weight > 0)) throw ConfigError("mixture weight for " + e.corpus + " must be positive");
    auto it = registry.find(e.corpus);
    if (it == registry.end() || it->second.empty()) {
      throw ConfigError("stage " + std::to_string(stage.stage_id) + " needs corpus '" + e.corpus +
                        "', which is missing or empty");
    }
  }
  return plan;
}

SamplingPlan build_mixture(int stage_id, const Registry& registry) {
  StageConfig s;
  s.stage_id = stage_id;
  s.mixture = default_mixture(stage_id);
  return build_mixture(s, registry);
}

MixtureSampler::MixtureSampler(const SamplingPlan& plan, const Registry& registry, std::uint64_t seed)
    : plan_(plan), rng_(seed) {
  double total = 0.0;
  for (const auto& e : plan_.entries) {
    auto it = registry.find(e.corpus);
    if (it == registry.end() || it->second.empty()) throw ConfigError("missing corpus " + e.corpus);
    sources_.push_back(&it->second);
    total += e.weight;
    cumulative_.push_back(total);
    std::vector<size_t> order(it->second.size());
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order);
    order_.push_back(std::move(order));
    cursor_.push_back(0);
  }
  for (double& c : cumulative_) c /= total;
}

const corpus::Sample& MixtureSampler::next() {
  const double u = rng_.unit();
  size_t k = 0;
  while (k + 1 < cumulative_.size() && u >= cumulative_[k]) ++k;
  last_ = k;
  if (cursor_[k] == order_[k].size()) {
    rng_.shuffle(order_[k]);
    cursor_[k] = 0;
  }
  return (*sources_[k])[order_[k][cursor_[k]++]];
}

TrainState TrainState::fresh(const vlm::ModelConfig& config, std::uint64_t seed) {
  config.validate();
  TrainState s;
  s.policy = {config, vlm::Parameters::init(config, config.seed)};
  s.seed = seed;
  return s;
}

vlm::Checkpoint to_checkpoint(const TrainState& state) {
  vlm::Checkpoint c;
  c.config = state.policy.config;
  c.params = state.policy.params;
  c.meta = {{"stage", state.last_stage},
            {"step", state.step},
            {"seed", state.seed},
            {"history", state.history},
            {"loss_tokens", state.loss_tokens},
            {"tags", state.tags}};
  c.extras = state.optimizer_state;
  return c;
}

TrainState from_checkpoint(const vlm::Checkpoint& checkpoint) {
  TrainState s;
  s.policy = {checkpoint.config, checkpoint.params};
  const auto& m = checkpoint.meta;
  try {
    s.last_stage = m.at("stage").get<int>();
    s.step = m.at("step").get<long>();
    s.seed = m.at("seed").get<std::uint64_t>();
    s.history = m.at("history").get<std::vector<std::string>>();
    s.loss_tokens = m.at("loss_tokens").get<long>();
    if (m.contains("tags")) s.tags = m.at("tags");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint lacks training metadata: ") + e.what());
  }
  s.optimizer_state = checkpoint.extras;
  return s;
}

void to_json(nlohmann::json& j, const StepRecord& r) {
  j = nlohmann::json{{"type", "sft"},         {"stage", r.stage},         {"step", r.step},
                     {"loss", r.loss},        {"lr", r.lr},               {"tokens", r.tokens},
                     {"grad_norm", r.grad_norm}, {"wall_seconds", r.wall_seconds}};
}

void RunLog::append(const RunLog& other) {
  steps.insert(steps.end(), other.steps.begin(), other.steps.end());
  rl.insert(rl.end(), other.rl.begin(), other.rl.end());
  snapshots.insert(snapshots.end(), other.snapshots.begin(), other.snapshots.end());
}

std::string RunLog::to_jsonl() const {
  std::ostringstream out;
  for (const auto& r : steps) out << nlohmann::json(r).dump() << '\n';
  for (const auto& r : rl) {
    nlohmann::json j = r;
    j["type"] = "rl";
    j["stage"] = 4;
    out << j.dump() << '\n';
  }
  for (const auto& s : snapshots) out << s.dump() << '\n';
  return out.str();
}

std::pair<TrainState, RunLog> run_stage(TrainState state, const StageConfig& stage, const Registry& registry,
                                        const StageHooks& hooks) {
  stage.validate();
  if (stage.stage_id != state.last_stage + 1) {
    throw SequencingError("stage " + std::to_string(stage.stage_id) + " cannot follow stage " +
                          std::to_string(state.last_stage));
  }
  if (stage.stage_id == 4) throw ConfigError("stage 4 is reinforcement learning; run it through run_pipeline");
  const auto plan = build_mixture(stage, registry);
  MixtureSampler sampler(plan, registry, mix_seed(state.seed, static_cast<std::uint64_t>(stage.stage_id)));

  vlm::AdamWConfig opt = stage.optimizer;
  opt.weight_decay = stage.weight_decay;
  vlm::AdamW optimizer(state.policy.config, opt);
  if (!stage.reset_optimizer && !state.optimizer_state.empty()) optimizer.import_state(state.optimizer_state);

  RunLog log;
  const bool by_tokens = stage.token_budget > 0;
  long consumed = 0;
  const auto start = std::chrono::steady_clock::now();
  std::vector<vlm::TrainExample> batch;
  for (long step = 0; by_tokens ? consumed < stage.token_budget : step < stage.max_steps; ++step) {
    const double lr = by_tokens ? cosine_lr(consumed, stage.token_budget, stage.learning_rate, stage.final_lr)
                                : cosine_lr(step, stage.max_steps, stage.learning_rate, stage.final_lr);
    batch.clear();
    long batch_tokens = 0;
    for (int b = 0; b < stage.batch_size; ++b) {
      batch.push_back(sft_example(state.policy.config, sampler.next()));
      batch_tokens += batch.back().target_end - batch.back().target_begin;
      // The last batch of a budgeted stage stops once the budget is met.
      if (by_tokens && consumed + batch_tokens >= stage.token_budget) break;
    }
    auto result = vlm::loss_and_grads(state.policy.config, state.policy.params, batch);
    if (!std::isfinite(result.loss)) {
      throw Error("non-finite loss at stage " + std::to_string(stage.stage_id) + " step " + std::to_string(step));
    }
    const double norm = optimizer.step(state.policy.params, result.grads, lr);
    consumed += static_cast<long>(result.tokens);
    ++state.step;
    StepRecord rec{stage.stage_id,
                   step,
                   result.loss,
                   lr,
                   static_cast<long>(result.tokens),
                   norm,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    log.steps.push_back(rec);
    if (hooks.on_step) hooks.on_step(rec);
  }
  state.loss_tokens += consumed;
  state.last_stage = stage.stage_id;
  state.history.push_back(stage_digest(stage));
  state.optimizer_state = optimizer.export_state();
  if (hooks.evaluate) {
    nlohmann::json snap = hooks.evaluate(stage.stage_id, state);
    snap["type"] = "snapshot";
    snap["stage"] = stage.stage_id;
    log.snapshots.push_back(std::move(snap));
  }
  return {std::move(state), std::move(log)};
}

void PipelineConfig::validate() const {
  model.validate();
  grpo.validate();
  std::set<std::string> prev;
  int prev_id = 0;
  for (const auto& s : stages) {
    s.validate();
    require(s.stage_id > prev_id, "stages must be listed in increasing order");
    const auto names = names_of(s.mixture);
    if (s.stage_id >= 2 && s.stage_id <= 3 && prev_id == s.stage_id - 1) {
      require(std::includes(names.begin(), names.end(), prev.begin(), prev.end()),
              "stage " + std::to_string(s.stage_id) + " mixture must contain every corpus of the previous stage");
    }
    prev = names;
    prev_id = s.stage_id;
  }
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{{"model", c.model}, {"stages", c.stages}, {"grpo", c.grpo}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "model") {
      c.model = value.get<vlm::ModelConfig>();
    } else if (key == "stages") {
      c.stages = value.get<std::vector<StageConfig>>();
    } else if (key == "grpo") {
      c.grpo = value.get<grpo::GrpoConfig>();
    } else if (key == "seed") {
      c.seed = value.get<std::uint64_t>();
    } else {
      throw ConfigError("unknown pipeline key: " + key);
    }
  }
  c.validate();
}

namespace {

template <class E>
[[noreturn]] void rethrow_with_stage(const E& e, int stage) {
  throw E("stage " + std::to_string(stage) + " failed: " + e.what());
}

TrainState run_rl_stage(TrainState state, const PipelineConfig& config, const StageConfig& stage,
                        const Registry& registry, RunLog& log, const StageHooks& hooks) {
  if (state.last_stage != 3) {
    throw SequencingError("stage 4 cannot follow stage " + std::to_string(state.last_stage));
  }
  build_mixture(stage, registry);
  grpo::GrpoConfig g = config.grpo;
  g.learning_rate = stage.learning_rate;
  g.final_lr = stage.final_lr;
  g.steps = stage.max_steps;
  g.queries_per_step = stage.batch_size;
  g.optimizer = stage.optimizer;
  g.optimizer.weight_decay = stage.weight_decay;
  g.seed = mix_seed(state.seed, 4);
  std::vector<corpus::Sample> prompts;
  for (const auto& e : stage.mixture) {
    const auto& src = registry.at(e.corpus);
    prompts.insert(prompts.end(), src.begin(), src.end());
  }
  auto result = grpo::run_rl(state.policy, prompts, g, hooks.on_rl_step);
  state.policy = std::move(result.policy);
  state.step += stage.max_steps;
  state.last_stage = 4;
  state.history.push_back(stage_digest(stage));
  state.optimizer_state.clear();
  log.rl = std::move(result.log);
  if (hooks.evaluate) {
    nlohmann::json snap = hooks.evaluate(4, state);
    snap["type"] = "snapshot";
    snap["stage"] = 4;
    log.snapshots.push_back(std::move(snap));
  }
  return state;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, const Registry& registry,
                            const std::optional<TrainState>& start,
                            const std::optional<std::filesystem::path>& checkpoint_dir, const StageHooks& hooks) {
  config.validate();
  PipelineResult out{start ? *start : TrainState::fresh(config.model, config.seed), {}};
  if (!(out.state.policy.config == config.model)) throw ConfigError("start state has a different model config");
  if (checkpoint_dir) std::filesystem::create_directories(*checkpoint_dir);
  for (const auto& stage : config.stages) {
    if (stage.stage_id <= out.state.last_stage) continue;
    try {
      if (stage.stage_id == 4) {
        RunLog rl_log;
        out.state = run_rl_stage(std::move(out.state), config, stage, registry, rl_log, hooks);
        out.log.append(rl_log);
      } else {
        auto [next, log] = run_stage(std::move(out.state), stage, registry, hooks);
        out.state = std::move(next);
        out.log.append(log);
      }
      if (checkpoint_dir) {
        vlm::save_checkpoint(*checkpoint_dir / ("stage" + std::to_string(stage.stage_id) + ".ckpt"),
                             to_checkpoint(out.state));
      }
    } catch (const ConfigError& e) {
      rethrow_with_stage(e, stage.stage_id);
    } catch (const SequencingError& e) {
      rethrow_with_stage(e, stage.stage_id);
    } catch (const LengthError& e) {
      rethrow_with_stage(e, stage.stage_id);
    } catch (const ArgumentError& e) {
      rethrow_with_stage(e, stage.stage_id);
    } catch (const Error& e) {
      rethrow_with_stage(e, stage.stage_id);
    }
  }
  return out;
}

std::vector<StageConfig> paper_profile_stages() {
  std::vector<StageConfig> out;
  for (int k = 1; k <= 4; ++k) {
    StageConfig s;
    s.stage_id = k;
    s.mixture = default_mixture(k);
    s.batch_size = k < 4 ? 512 : 32;
    s.learning_rate = k < 4 ? 2e-6 : 1e-6;
    s.final_lr = 0.0;
    s.weight_decay = k < 4 ? 0.05 : 0.0;
    s.max_sequence_length = 32768;
    s.max_steps = 1000;
    out.push_back(s);
  }
  return out;
}

std::vector<StageConfig> default_stages() {
  std::vector<StageConfig> out;
  for (int k = 1; k <= 4; ++k) {
    StageConfig s;
    s.stage_id = k;
    s.mixture = default_mixture(k);
    s.batch_size = k < 4 ? 16 : 4;
    s.learning_rate = k < 4 ? 1e-3 : 1e-5;
    s.final_lr = k < 4 ? 1e-4 : 1e-5;
    s.weight_decay = k < 4 ? 0.05 : 0.0;
    s.max_steps = k == 1 ? 1200 : k == 2 ? 1000 : k == 3 ? 700 : 200;
    s.max_sequence_length = 160;
    out.push_back(s);
  }
  return out;
}

long measure_tokens(const StageConfig& stage, const Registry& registry, std::uint64_t seed) {
  MixtureSampler sampler(build_mixture(stage, registry), registry,
                         mix_seed(seed, static_cast<std::uint64_t>(stage.stage_id)));
  long total = 0;
  for (long i = 0; i < static_cast<long>(stage.max_steps) * stage.batch_size; ++i) {
    total += static_cast<long>(loss_tokens(sampler.next()));
  }
  return total;
}

}  // namespace xvlm::curriculum
