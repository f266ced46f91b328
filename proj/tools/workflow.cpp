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

#include "workflow.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "xvlm/cot/cot.hpp"

namespace xvlm::cli {

curriculum::Registry build_registry(const CorpusPlan& plan) {
  curriculum::Registry registry;
  std::vector<corpus::Sample> cot_base, rl;
  for (const auto& name : corpus::generator_names()) {
    registry[name] = corpus::generate_corpus(name, plan.seed, plan.size_of(name));
    auto base = corpus::generate_corpus(name, plan.cot_seed, plan.cot_per_corpus);
    cot_base.insert(cot_base.end(), base.begin(), base.end());
    auto prompts = corpus::generate_corpus(name, plan.rl_seed, plan.rl_per_corpus);
    rl.insert(rl.end(), prompts.begin(), prompts.end());
  }
  registry[curriculum::kCotCorpus] = cot::build_cot_corpus(cot_base, curriculum::kCotCorpus);
  registry[curriculum::kRlCorpus] = std::move(rl);
  return registry;
}

std::vector<curriculum::StageConfig> ablation_stages(const RunConfig& config) {
  const double scale = config.ablation.step_scale;
  std::vector<curriculum::StageConfig> stages;
  for (auto s : config.pipeline.stages) {
    if (s.stage_id > 3) continue;
    s.max_steps = std::max(1, static_cast<int>(std::lround(s.max_steps * scale)));
    if (s.token_budget > 0) s.token_budget = std::max(1L, std::lround(s.token_budget * scale));
    stages.push_back(s);
  }
  return stages;
}

AblationRun run_ablation(const RunConfig& config, const curriculum::Registry& registry,
                         const std::vector<eval::Suite>& suites, std::ostream* progress) {
  const auto& plan = config.ablation;
  const auto stages = ablation_stages(config);
  AblationRun run;
  std::map<std::string, eval::AblationRow> mean;
  std::vector<std::string> order;
  const double w = 1.0 / static_cast<double>(plan.seeds.size());
  for (const auto seed : plan.seeds) {
    auto variants = eval::standard_variants(stages, registry, seed);
    std::erase_if(variants, [&](const auto& v) {
      return std::find(plan.variants.begin(), plan.variants.end(), v.name) == plan.variants.end();
    });
    if (progress) *progress << "ablation seed " << seed << "\n" << std::flush;
    auto table = eval::ablation_matrix(variants, config.pipeline.model, seed, registry, suites);
    if (progress) *progress << table.to_text() << std::flush;
    for (const auto& r : table.rows) {
      if (!mean.count(r.variant)) {
        order.push_back(r.variant);
        mean[r.variant] = eval::AblationRow{r.variant};
      }
      auto& m = mean[r.variant];
      m.affordance += w * r.affordance;
      m.spatial += w * r.spatial;
      m.plan += w * r.plan;
      m.embodied_avg += w * r.embodied_avg;
      m.driving += w * r.driving;
      m.loss_tokens = std::max(m.loss_tokens, r.loss_tokens);
    }
    run.per_seed.emplace_back(seed, std::move(table));
  }
  for (const auto& name : order) run.mean.rows.push_back(mean[name]);
  return run;
}

}  // namespace xvlm::cli
