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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "xvlm/grpo/grpo.hpp"
#include "xvlm/rng.hpp"
#include "xvlm/synthcorpus/generators.hpp"

namespace xvlm::grpo {
namespace {

vlm::ModelConfig micro_config() {
  vlm::ModelConfig c;
  c.image_size = 4;
  c.patch_size = 2;
  c.vision_dim = 4;
  c.vision_layers = 1;
  c.decoder_dim = 4;
  c.decoder_layers = 1;
  c.heads = 2;
  c.vocab_size = 12;
  c.max_seq_len = 12;
  c.mlp_ratio = 1;
  c.init_std = 0.5;
  return c;
}

vlm::ModelConfig small_config() {
  vlm::ModelConfig c;
  c.vision_dim = 8;
  c.vision_layers = 1;
  c.decoder_dim = 16;
  c.decoder_layers = 1;
  c.heads = 2;
  c.max_seq_len = 160;
  c.seed = 3;
  return c;
}

Image random_image(int side, Rng& rng) {
  Image img(side, side);
  for (double& v : img.pixels) v = rng.unit();
  return img;
}

// A group over the micro policy with hand-picked response tokens. Old
// log-probabilities are the current ones shifted per response so ratios land
// inside and outside the clip range.
RolloutGroup micro_group(const Policy& policy, Rng& rng, const std::vector<std::vector<int>>& responses,
                         const std::vector<double>& shifts, const std::vector<double>& advantages) {
  RolloutGroup g;
  g.query.images = {random_image(4, rng)};
  g.prompt.ids = {vlm::kBos, vlm::kImg, vlm::kImg, vlm::kImg, vlm::kImg, 9, 10};
  for (size_t i = 0; i < responses.size(); ++i) {
    g.responses.push_back("r" + std::to_string(i));
    g.tokens.push_back(responses[i]);
    auto lp = sequence_logprobs(policy, g.prompt, g.query.images, responses[i], 1.0);
    std::vector<double> ref = lp;
    for (double& v : lp) v += shifts[i];
    for (size_t t = 0; t < ref.size(); ++t) ref[t] += 0.3 * std::sin(static_cast<double>(t + i + 1));
    g.old_logprobs.push_back(lp);
    g.ref_logprobs.push_back(ref);
    g.rewards.push_back(advantages[i]);
    g.breakdowns.push_back({});
  }
  g.advantages = advantages;
  return g;
}

TEST(GroupAdvantages, DegenerateAndHandComputed) {
  const std::vector<double> same(6, 0.7);
  for (double a : group_advantages(same, 1e-8)) EXPECT_LT(std::abs(a), 1e-6);
  const std::vector<double> two{1.0, 0.0};
  const auto a = group_advantages(two, 1e-8);
  EXPECT_NEAR(a[0], 1.0, 1e-6);
  EXPECT_NEAR(a[1], -1.0, 1e-6);
  const std::vector<double> one{1.0};
  EXPECT_THROW(group_advantages(one, 1e-8), ArgumentError);
}

TEST(GroupAdvantages, CenteringScaleAndShift) {
  Rng rng(4);
  for (int trial = 0; trial < 2000; ++trial) {
    const int g = rng.range(2, 16);
    std::vector<double> r(g);
    for (double& v : r) v = rng.bernoulli(0.3) ? std::round(rng.unit()) : rng.uniform(-2.0, 3.0);
    const auto a = group_advantages(r, 1e-8);
    EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 0.0, 1e-9);
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / g;
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    if (std::sqrt(var / g) > 100 * 1e-8) {
      double sq = 0.0;
      for (double v : a) sq += v * v;
      EXPECT_NEAR(sq / g, 1.0, 1e-3);
    }
    auto shifted = r;
    for (double& v : shifted) v += 2.5;
    auto scaled = r;
    for (double& v : scaled) v *= 3.0;
    const auto as = group_advantages(shifted, 1e-8);
    const auto ak = group_advantages(scaled, 1e-8);
    for (int i = 0; i < g; ++i) {
      EXPECT_NEAR(as[i], a[i], 1e-9);
      EXPECT_EQ(ak[i] > 1e-12, a[i] > 1e-12);
      EXPECT_EQ(ak[i] < -1e-12, a[i] < -1e-12);
    }
  }
}

TEST(Surrogate, MatchesFiniteDifferences) {
  const auto c = micro_config();
  Policy policy{c, vlm::Parameters::init(c, 8)};
  ASSERT_LE(policy.params.count(), 1000u);
  Rng rng(8);
  std::vector<RolloutGroup> groups;
  groups.push_back(micro_group(policy, rng, {{11, 10, vlm::kEos}, {9}, {10, 11}}, {0.0, 0.5, -0.5},
                               {1.2, -0.7, 0.9}));
  groups.push_back(micro_group(policy, rng, {{9, 9}, {11, 10, 9, 10}}, {-0.5, 0.5}, {-1.0, 1.0}));

  for (auto averaging : {TokenAveraging::kPerToken, TokenAveraging::kPerSequence}) {
    for (double beta : {0.0, 0.15}) {
      GrpoConfig cfg;
      cfg.kl_beta = beta;
      cfg.averaging = averaging;
      const auto analytic = surrogate_and_grads(policy, groups, cfg);
      EXPECT_GT(analytic.clip_fraction, 0.0);
      auto grads = analytic.grads.named();
      auto params = policy.params.named();
      const double h = 1e-5;
      double worst = 0.0;
      for (size_t i = 0; i < params.size(); ++i) {
        Mat& w = *params[i].second;
        for (Eigen::Index k = 0; k < w.size(); ++k) {
          const double orig = w.data()[k];
          w.data()[k] = orig + h;
          const double up = -surrogate_and_grads(policy, groups, cfg).objective;
          w.data()[k] = orig - h;
          const double down = -surrogate_and_grads(policy, groups, cfg).objective;
          w.data()[k] = orig;
          const double numeric = (up - down) / (2 * h);
          const double a = grads[i].second->data()[k];
          const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
          worst = std::max(worst, rel);
          EXPECT_LT(rel, 1e-4) << params[i].first << "[" << k << "] analytic " << a << " numeric " << numeric;
        }
      }
      RecordProperty("worst_relative_error", std::to_string(worst));
    }
  }
}

TEST(Surrogate, ClippedBranchCarriesNoGradient) {
  const auto c = micro_config();
  Policy policy{c, vlm::Parameters::init(c, 9)};
  Rng rng(9);
  GrpoConfig cfg;
  // ratio e^0.5 > 1.2 with a > 0, and ratio e^-0.5 < 0.8 with a < 0: both clipped.
  for (auto [shift, adv] : {std::pair{-0.5, 1.0}, std::pair{0.5, -1.0}}) {
    std::vector<RolloutGroup> groups{micro_group(policy, rng, {{10, 11}}, {shift}, {adv})};
    const auto r = surrogate_and_grads(policy, groups, cfg);
    EXPECT_EQ(vlm::global_norm(r.grads), 0.0);
    EXPECT_EQ(r.clip_fraction, 1.0);
  }
  // Same ratios with the opposite advantage sign take the unclipped branch.
  for (auto [shift, adv] : {std::pair{-0.5, -1.0}, std::pair{0.5, 1.0}}) {
    std::vector<RolloutGroup> groups{micro_group(policy, rng, {{10, 11}}, {shift}, {adv})};
    EXPECT_GT(vlm::global_norm(surrogate_and_grads(policy, groups, cfg).grads), 0.0);
  }
}

TEST(GrpoStep, ZeroAdvantagesLeaveParamsUnchanged) {
  const auto c = micro_config();
  Policy policy{c, vlm::Parameters::init(c, 10)};
  const auto before = policy.params;
  Rng rng(10);
  std::vector<RolloutGroup> groups{micro_group(policy, rng, {{10}, {11, 9}}, {0.0, 0.0}, {0.0, 0.0})};
  vlm::AdamW opt(c, {});
  GrpoConfig cfg;
  const auto stats = grpo_step(policy, opt, groups, cfg, 1e-2);
  EXPECT_EQ(stats.grad_norm, 0.0);
  EXPECT_TRUE(policy.params == before);
}

TEST(GrpoStep, PositiveAdvantageRaisesLogProb) {
  const auto c = micro_config();
  Policy policy{c, vlm::Parameters::init(c, 11)};
  Rng rng(11);
  std::vector<RolloutGroup> groups{
      micro_group(policy, rng, {{10, 11}, {9, 9}, {11}}, {0.0, 0.0, 0.0}, {1.4, -0.7, -0.7})};
  auto total = [&](const Policy& p) {
    const auto lp = sequence_logprobs(p, groups[0].prompt, groups[0].query.images, groups[0].tokens[0], 1.0);
    return std::accumulate(lp.begin(), lp.end(), 0.0);
  };
  const double before = total(policy);
  vlm::AdamW opt(c, {});
  grpo_step(policy, opt, groups, GrpoConfig{}, 1e-3);
  EXPECT_GE(total(policy), before);
}

TEST(GrpoStep, NonFiniteObjectiveAborts) {
  const auto c = micro_config();
  Policy policy{c, vlm::Parameters::init(c, 12)};
  Rng rng(12);
  std::vector<RolloutGroup> groups{micro_group(policy, rng, {{10}, {11}}, {0.0, 0.0}, {1.0, -1.0})};
  groups[0].old_logprobs[0][0] = std::nan("");
  vlm::AdamW opt(c, {});
  EXPECT_THROW(grpo_step(policy, opt, groups, GrpoConfig{}, 1e-3), Error);
}

TEST(SampleGroup, ContractGreedyAndSeeds) {
  const auto c = small_config();
  Policy policy{c, vlm::Parameters::init(c, c.seed)};
  const auto query = corpus::gen_general(1, 1)[0];
  const auto g = sample_group(policy, query, 8, 1.0, 12, 42, {});
  EXPECT_EQ(g.size(), 8);
  EXPECT_EQ(g.rewards.size(), 8u);
  EXPECT_EQ(g.tokens.size(), 8u);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(g.old_logprobs[i].size(), g.tokens[i].size());
  const auto again = sample_group(policy, query, 8, 1.0, 12, 42, {});
  EXPECT_EQ(again.responses, g.responses);
  EXPECT_EQ(again.old_logprobs, g.old_logprobs);
  const auto greedy = sample_group(policy, query, 4, 0.0, 12, 42, {});
  for (const auto& r : greedy.responses) EXPECT_EQ(r, greedy.responses[0]);
  EXPECT_THROW(sample_group(policy, query, 1, 1.0, 12, 42, {}), ArgumentError);
}

TEST(SampleGroup, RecordedLogProbsMatchTeacherForcing) {
  const auto c = small_config();
  Policy policy{c, vlm::Parameters::init(c, c.seed)};
  const auto query = corpus::gen_embodied_spatial(2, 1)[0];
  const auto g = sample_group(policy, query, 3, 0.7, 10, 5, {}, &policy);
  for (int i = 0; i < g.size(); ++i) {
    const auto lp = sequence_logprobs(policy, g.prompt, query.images, g.tokens[i], 0.7);
    ASSERT_EQ(lp.size(), g.old_logprobs[i].size());
    for (size_t t = 0; t < lp.size(); ++t) {
      EXPECT_NEAR(lp[t], g.old_logprobs[i][t], 1e-9);
      EXPECT_NEAR(g.ref_logprobs[i][t], lp[t], 1e-9);
    }
  }
}

TEST(RunRl, ZeroStepsIsIdentityAndRunsAreDeterministic) {
  const auto c = small_config();
  Policy policy{c, vlm::Parameters::init(c, c.seed)};
  const auto queries = corpus::gen_general(7, 6);
  GrpoConfig cfg;
  cfg.steps = 0;
  EXPECT_TRUE(run_rl(policy, queries, cfg).policy.params == policy.params);

  cfg.steps = 3;
  cfg.group_size = 4;
  cfg.queries_per_step = 2;
  cfg.max_new_tokens = 8;
  cfg.learning_rate = 1e-3;
  cfg.kl_beta = 0.05;
  cfg.seed = 17;
  const auto snapshot = policy.params;
  const auto a = run_rl(policy, queries, cfg);
  const auto b = run_rl(policy, queries, cfg);
  EXPECT_TRUE(policy.params == snapshot);
  EXPECT_TRUE(a.policy.params == b.policy.params);
  ASSERT_EQ(a.log.size(), 3u);
  for (size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].mean_reward, b.log[i].mean_reward);
    EXPECT_EQ(a.log[i].kl, b.log[i].kl);
    EXPECT_GE(a.log[i].mean_reward, 0.0);
    EXPECT_LE(a.log[i].mean_reward, 1.1);
  }
}

TEST(GrpoConfigTest, JsonRoundTripAndValidation) {
  GrpoConfig c;
  c.group_size = 6;
  c.averaging = TokenAveraging::kPerSequence;
  c.reward.gate_on_format = true;
  const nlohmann::json j = c;
  const auto back = j.get<GrpoConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_THROW((nlohmann::json{{"group_size", 1}}.get<GrpoConfig>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"clip_eps", 0.0}}.get<GrpoConfig>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"temperature", 0.0}}.get<GrpoConfig>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"bogus", 1}}.get<GrpoConfig>()), ConfigError);
}

}  // namespace
}  // namespace xvlm::grpo
