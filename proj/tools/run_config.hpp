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
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xvlm/curriculum/curriculum.hpp"
#include "xvlm/evalharness/evalharness.hpp"

namespace xvlm::cli {

struct CorpusPlan {
  std::uint64_t seed = 1000;
  int per_corpus = 2000;
  std::map<std::string, int> sizes;  // per-generator overrides
  std::uint64_t cot_seed = 3000;
  int cot_per_corpus = 300;
  std::uint64_t rl_seed = 5000;
  int rl_per_corpus = 60;

  int size_of(const std::string& generator) const;
};

struct SuitePlan {
  std::uint64_t seed = 9000;
  int count = 100;
  // Explicit suites; empty selects the default battery.
  std::vector<eval::SuiteSpec> suites;

  std::vector<eval::SuiteSpec> specs() const;
};

// Model used when a run configuration names none.
vlm::ModelConfig toy_model();

struct AblationPlan {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::string> variants{"baseline", "embodied_only", "ad_only", "mixed", "multi_stage"};
  // Fraction of the configured supervised steps each ablation run trains for.
  double step_scale = 0.2;
};

struct RunConfig {
  std::string profile = "default";
  CorpusPlan corpora;
  curriculum::PipelineConfig pipeline;
  SuitePlan suites;
  AblationPlan ablation;

  // Throws ConfigError.
  void validate() const;
  // SHA-256 of the canonical JSON form.
  std::string digest() const;
};

nlohmann::json to_json(const RunConfig& c);
// Unknown keys anywhere are rejected with ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Toy-scale defaults; equal to configs/default.json.
RunConfig default_run_config();
// Default corpora and model with the published stage hyperparameters.
RunConfig paper_run_config();

}  // namespace xvlm::cli
