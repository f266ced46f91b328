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

#include "run_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace xvlm::cli {

using nlohmann::json;

namespace {

template <typename T>
T get(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key in " + where + ": " + key);
  }
}

CorpusPlan corpus_plan_from_json(const json& j) {
  reject_unknown(j, {"seed", "per_corpus", "sizes", "cot_seed", "cot_per_corpus", "rl_seed", "rl_per_corpus"},
                 "corpora");
  CorpusPlan p;
  if (j.contains("seed")) p.seed = get<std::uint64_t>(j["seed"], "corpora.seed");
  if (j.contains("per_corpus")) p.per_corpus = get<int>(j["per_corpus"], "corpora.per_corpus");
  if (j.contains("sizes")) p.sizes = get<std::map<std::string, int>>(j["sizes"], "corpora.sizes");
  if (j.contains("cot_seed")) p.cot_seed = get<std::uint64_t>(j["cot_seed"], "corpora.cot_seed");
  if (j.contains("cot_per_corpus")) p.cot_per_corpus = get<int>(j["cot_per_corpus"], "corpora.cot_per_corpus");
  if (j.contains("rl_seed")) p.rl_seed = get<std::uint64_t>(j["rl_seed"], "corpora.rl_seed");
  if (j.contains("rl_per_corpus")) p.rl_per_corpus = get<int>(j["rl_per_corpus"], "corpora.rl_per_corpus");
  return p;
}

json to_json(const CorpusPlan& p) {
  return json{{"seed", p.seed},          {"per_corpus", p.per_corpus},         {"sizes", p.sizes},
              {"cot_seed", p.cot_seed},  {"cot_per_corpus", p.cot_per_corpus}, {"rl_seed", p.rl_seed},
              {"rl_per_corpus", p.rl_per_corpus}};
}

SuitePlan suite_plan_from_json(const json& j) {
  reject_unknown(j, {"seed", "count", "suites"}, "suites");
  SuitePlan p;
  if (j.contains("seed")) p.seed = get<std::uint64_t>(j["seed"], "suites.seed");
  if (j.contains("count")) p.count = get<int>(j["count"], "suites.count");
  if (j.contains("suites")) {
    if (!j["suites"].is_array()) throw ConfigError("suites.suites must be an array");
    for (const auto& s : j["suites"]) p.suites.push_back(s.get<eval::SuiteSpec>());
  }
  return p;
}

json to_json(const SuitePlan& p) {
  json suites = json::array();
  for (const auto& s : p.suites) suites.push_back(s);
  return json{{"seed", p.seed}, {"count", p.count}, {"suites", suites}};
}

AblationPlan ablation_plan_from_json(const json& j) {
  reject_unknown(j, {"seeds", "variants", "step_scale"}, "ablation");
  AblationPlan p;
  if (j.contains("seeds")) p.seeds = get<std::vector<std::uint64_t>>(j["seeds"], "ablation.seeds");
  if (j.contains("variants")) p.variants = get<std::vector<std::string>>(j["variants"], "ablation.variants");
  if (j.contains("step_scale")) p.step_scale = get<double>(j["step_scale"], "ablation.step_scale");
  return p;
}

json to_json(const AblationPlan& p) {
  return json{{"seeds", p.seeds}, {"variants", p.variants}, {"step_scale", p.step_scale}};
}

}  // namespace

vlm::ModelConfig toy_model() {
  vlm::ModelConfig m;
  m.vision_dim = 32;
  m.vision_layers = 1;
  m.decoder_dim = 64;
  m.decoder_layers = 2;
  m.seed = 1;
  return m;
}

int CorpusPlan::size_of(const std::string& generator) const {
  auto it = sizes.find(generator);
  return it == sizes.end() ? per_corpus : it->second;
}

std::vector<eval::SuiteSpec> SuitePlan::specs() const {
  return suites.empty() ? eval::default_suite_specs(seed, count) : suites;
}

void RunConfig::validate() const {
  pipeline.validate();
  if (corpora.per_corpus <= 0) throw ConfigError("corpora.per_corpus must be positive");
  const auto& names = corpus::generator_names();
  for (const auto& [name, n] : corpora.sizes) {
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw ConfigError("corpora.sizes names an unknown generator: " + name);
    }
    if (n <= 0) throw ConfigError("corpora.sizes." + name + " must be positive");
  }
  if (corpora.cot_per_corpus < 0 || corpora.rl_per_corpus < 0) {
    throw ConfigError("corpora: CoT and RL sizes must be non-negative");
  }
  std::set<std::uint64_t> seeds{corpora.seed, corpora.cot_seed, corpora.rl_seed};
  if (seeds.size() != 3 || seeds.count(suites.seed)) {
    throw ConfigError("corpus, CoT, RL and suite seeds must be distinct");
  }
  if (suites.count <= 0) throw ConfigError("suites.count must be positive");
  for (const auto& s : suites.suites) {
    if (seeds.count(s.seed)) throw ConfigError("suite " + s.name + " reuses a training corpus seed");
  }
  if (ablation.seeds.empty()) throw ConfigError("ablation.seeds must not be empty");
  if (!(ablation.step_scale > 0.0)) throw ConfigError("ablation.step_scale must be positive");
  if (profile != "default" && profile != "paper") throw ConfigError("profile must be \"default\" or \"paper\"");
}

std::string RunConfig::digest() const { return sha256_hex(to_json(*this).dump()); }

json to_json(const RunConfig& c) {
  json pipeline = c.pipeline;
  json j{{"profile", c.profile},
         {"corpora", to_json(c.corpora)},
         {"suites", to_json(c.suites)},
         {"ablation", to_json(c.ablation)}};
  for (const auto& [key, value] : pipeline.items()) j[key] = value;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, {"profile", "corpora", "model", "stages", "grpo", "seed", "suites", "ablation"}, "config");
  RunConfig c;
  if (j.contains("profile")) c.profile = get<std::string>(j["profile"], "profile");
  if (j.contains("corpora")) c.corpora = corpus_plan_from_json(j["corpora"]);
  if (j.contains("suites")) c.suites = suite_plan_from_json(j["suites"]);
  if (j.contains("ablation")) c.ablation = ablation_plan_from_json(j["ablation"]);
  json pipeline = json::object();
  for (const char* key : {"model", "stages", "grpo", "seed"}) {
    if (j.contains(key)) pipeline[key] = j[key];
  }
  if (!pipeline.contains("stages")) pipeline["stages"] = curriculum::default_stages();
  if (!pipeline.contains("model")) pipeline["model"] = toy_model();
  c.pipeline = pipeline.get<curriculum::PipelineConfig>();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

RunConfig default_run_config() { return run_config_from_json(json::object()); }

RunConfig paper_run_config() {
  json stages = curriculum::paper_profile_stages();
  return run_config_from_json(json{{"profile", "paper"}, {"stages", stages}});
}

}  // namespace xvlm::cli
