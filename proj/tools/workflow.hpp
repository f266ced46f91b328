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
#include <ostream>
#include <utility>
#include <vector>

#include "run_config.hpp"

namespace xvlm::cli {

// Every corpus of a run directory, in memory: one per generator plus "cot"
// and "rl".
curriculum::Registry build_registry(const CorpusPlan& plan);

// Supervised stages 1-3 with steps (and budgets) multiplied by step_scale.
std::vector<curriculum::StageConfig> ablation_stages(const RunConfig& config);

struct AblationRun {
  std::vector<std::pair<std::uint64_t, eval::AblationTable>> per_seed;
  // Seed-wise means; loss_tokens is the per-seed maximum.
  eval::AblationTable mean;
};

AblationRun run_ablation(const RunConfig& config, const curriculum::Registry& registry,
                         const std::vector<eval::Suite>& suites, std::ostream* progress = nullptr);

}  // namespace xvlm::cli
