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

#include "xvlm/grpo/grpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "xvlm/rng.hpp"

namespace xvlm::grpo {

void GrpoConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("grpo: ") + what);
  };
  require(group_size >= 2, "group_size must be at least 2");
  require(clip_eps > 0, "clip_eps must be positive");
  require(kl_beta >= 0, "kl_beta must be non-negative");
  require(temperature > 0, "temperature must be positive");
  require(learning_rate > 0, "learning_rate must be positive");
  require(final_lr >= 0, "final_lr must be non-negative");
  require(steps >= 0, "steps must be non-negative");
  require(queries_per_step > 0, "queries_per_step must be positive");
  require(updates_per_batch > 0, "updates_per_batch must be positive");
  require(max_new_tokens > 0, "max_new_tokens must be positive");
  require(advantage_eps > 0, "advantage_eps must be positive");
}

void to_json(nlohmann::json& j, const GrpoConfig& c) {
  j = nlohmann::json{{"group_size", c.group_size},
                     {"clip_eps", c.clip_eps},
                     {"kl_beta", c.kl_beta},
                     {"temperature", c.temperature},
                     {"learning_rate", c.learning_rate},
                     {"final_lr", c.final_lr},
                     {"steps", c.steps},
                     {"queries_per_step", c.queries_per_step},
                     {"updates_per_batch", c.updates_per_batch},
                     {"max_new_tokens", c.max_new_tokens},
                     {"advantage_eps", c.advantage_eps},
                     {"averaging", c.averaging == TokenAveraging::kPerToken ? "token" : "sequence"},
                     {"optimizer", c.optimizer},
                     {"reward", c.reward},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, GrpoConfig& c) {
  if (!j.is_object()) throw ConfigError("grpo config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "group_size") {
      c.group_size = value.get<int>();
    } else if (key == "clip_eps") {
      c.clip_eps = value.get<double>();
    } else if (key == "kl_beta") {
      c.kl_beta = value.get<double>();
    } else if (key == "temperature") {
      c.temperature = value.get<double>();
    } else if (key == "learning_rate") {
      c.learning_rate = value.get<double>();
    } else if (key == "final_lr") {
      c.final_lr = value.get<double>();
    } else if (key == "steps") {
      c.steps = value.get<int>();
    } else if (key == "queries_per_step") {
      c.queries_per_step = value.get<int>();
    } else if (key == "updates_per_batch") {
      c.updates_per_batch = value.get<int>();
    } else if (key == "max_new_tokens") {
      c.max_new_tokens = value.get<int>();
    } else if (key == "advantage_eps") {
      c.advantage_eps = value.get<double>();
    } else if (key == "averaging") {
      const auto a = value.get<std::string>();
      if (a != "token" && a != "sequence") throw ConfigError("grpo averaging must be token or sequence");
      c.averaging = a == "token" ? TokenAveraging::kPerToken : TokenAveraging::kPerSequence;
    } else if (key == "optimizer") {
      c.optimizer = value.get<vlm::AdamWConfig>();
    } else if (key == "reward") {
      c.reward = value.get<rewards::RewardConfig>();
    } else if (key == "seed") {
      c.seed = value.get<std::uint64_t>();
    } else {
      throw ConfigError("unknown grpo key: " + key);
    }
  }
  c.validate();
}

namespace {

vlm::TokenSequence extend(const vlm::TokenSequence& prompt, std::span<const int> tokens) {
  vlm::TokenSequence seq = prompt;
  seq.ids.insert(seq.ids.end(), tokens.begin(), tokens.end());
  return seq;
}

std::vector<int> response_rows(const vlm::TokenSequence& prompt, size_t n) {
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), static_cast<int>(prompt.ids.size()) - 1);
  return rows;
}

// Temperature-scaled log-softmax of each row.
// Over the decodable vocabulary, matching generate().
Mat log_softmax(const Mat& logits, double temperature) {
  Mat out = logits / temperature;
  for (Eigen::Index v = 0; v < out.cols(); ++v) {
    if (!vlm::decodable(static_cast<int>(v))) out.col(v).setConstant(-std::numeric_limits<double>::infinity());
  }
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double mx = out.row(r).maxCoeff();
    const double lse = mx + std::log((out.row(r).array() - mx).exp().sum());
    out.row(r).array() -= lse;
  }
  return out;
}

}  // namespace

std::vector<double> sequence_logprobs(const Policy& policy, const vlm::TokenSequence& prompt,
                                      std::span<const Image> images, std::span<const int> tokens,
                                      double temperature) {
  if (tokens.empty()) return {};
  vlm::ForwardTrace trace(policy.config, policy.params, extend(prompt, tokens), images);
  const auto rows = response_rows(prompt, tokens.size());
  const Mat lp = log_softmax(trace.logits(rows), temperature);
  std::vector<double> out(tokens.size());
  for (size_t t = 0; t < tokens.size(); ++t) out[t] = lp(static_cast<Eigen::Index>(t), tokens[t]);
  return out;
}

RolloutGroup sample_group(const Policy& policy, const corpus::Sample& query, int group_size, double temperature,
                          int max_new_tokens, std::uint64_t seed, const rewards::RewardConfig& reward,
                          const Policy* reference) {
  if (group_size < 2) throw ArgumentError("sample_group: group_size must be at least 2");
  RolloutGroup g;
  g.query = query;
  g.prompt = prompt_sequence(policy.config, query);
  for (int i = 0; i < group_size; ++i) {
    vlm::DecodeOptions opts;
    opts.max_new = max_new_tokens;
    opts.temperature = temperature;
    opts.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    auto gen = respond(policy, query, opts);
    const auto r = rewards::total_reward(query, gen.text, reward);
    if (reference != nullptr) {
      g.ref_logprobs.push_back(sequence_logprobs(*reference, g.prompt, query.images, gen.tokens,
                                                 temperature > 0 ? temperature : 1.0));
    }
    g.responses.push_back(std::move(gen.text));
    g.tokens.push_back(std::move(gen.tokens));
    g.old_logprobs.push_back(std::move(gen.logprobs));
    g.breakdowns.push_back(r);
    g.rewards.push_back(r.total);
  }
  return g;
}

std::vector<double> group_advantages(std::span<const double> rewards, double eps) {
  if (rewards.size() < 2) throw ArgumentError("group_advantages: need at least two rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double scale = std::sqrt(var / n + eps * eps);
  std::vector<double> out(rewards.size(), 0.0);
  // Degenerate group.
  if (std::adjacent_find(rewards.begin(), rewards.end(), std::not_equal_to<>()) == rewards.end()) return out;
  for (size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / scale;
  return out;
}

SurrogateResult surrogate_and_grads(const Policy& policy, std::span<const RolloutGroup> groups,
                                    const GrpoConfig& config) {
  if (groups.empty()) throw ArgumentError("grpo: no groups");
  SurrogateResult res{0.0, vlm::Parameters::zeros(policy.config), 0, 0.0, 0.0};
  size_t responses = 0;
  for (const auto& g : groups) {
    if (g.advantages.size() != g.responses.size()) throw ArgumentError("grpo: advantages not populated");
    if (config.kl_beta > 0 && g.ref_logprobs.size() != g.responses.size())
      throw ArgumentError("grpo: kl_beta > 0 needs reference log-probabilities");
    for (const auto& t : g.tokens) {
      res.tokens += t.size();
      if (!t.empty()) ++responses;
    }
  }
  if (res.tokens == 0) return res;

  const double temp = config.temperature;
  const double lo = 1.0 - config.clip_eps;
  const double hi = 1.0 + config.clip_eps;
  size_t clipped = 0;
  double kl_sum = 0.0;
  size_t kl_tokens = 0;
  for (const auto& g : groups) {
    for (int i = 0; i < g.size(); ++i) {
      const auto& toks = g.tokens[i];
      const double a = g.advantages[i];
      if (toks.empty() || (a == 0.0 && config.kl_beta == 0.0)) continue;
      const double w = config.averaging == TokenAveraging::kPerToken
                           ? 1.0 / static_cast<double>(res.tokens)
                           : 1.0 / (static_cast<double>(toks.size()) * static_cast<double>(responses));
      vlm::ForwardTrace trace(policy.config, policy.params, extend(g.prompt, toks), g.query.images);
      const auto rows = response_rows(g.prompt, toks.size());
      const Mat logits = trace.logits(rows);
      const Mat lp = log_softmax(logits, temp);
      Mat dlogits(lp.rows(), lp.cols());
      for (Eigen::Index r = 0; r < lp.rows(); ++r) {
        const int tok = toks[r];
        const double logp = lp(r, tok);
        const double ratio = std::exp(logp - g.old_logprobs[i][r]);
        const double clipped_ratio = std::clamp(ratio, lo, hi);
        res.objective += w * std::min(ratio * a, clipped_ratio * a);
        const bool active = a >= 0.0 ? ratio <= hi : ratio >= lo;
        if (ratio < lo || ratio > hi) ++clipped;
        double dobj = active ? w * ratio * a : 0.0;
        if (config.kl_beta > 0) {
          const double delta = g.ref_logprobs[i][r] - logp;
          const double k3 = std::exp(delta) - delta - 1.0;
          res.objective -= w * config.kl_beta * k3;
          dobj -= w * config.kl_beta * (1.0 - std::exp(delta));
          kl_sum += k3;
          ++kl_tokens;
        }
        // d logp / d logits = (onehot - softmax) / T; the loss is -objective.
        dlogits.row(r) = lp.row(r).array().exp() * (dobj / temp);
        dlogits(r, tok) -= dobj / temp;
      }
      trace.backward(rows, dlogits, res.grads);
    }
  }
  res.clip_fraction = static_cast<double>(clipped) / static_cast<double>(res.tokens);
  res.kl = kl_tokens > 0 ? kl_sum / static_cast<double>(kl_tokens) : 0.0;
  return res;
}

StepStats grpo_step(Policy& policy, vlm::AdamW& optimizer, std::span<const RolloutGroup> groups,
                    const GrpoConfig& config, double lr) {
  auto s = surrogate_and_grads(policy, groups, config);
  if (!std::isfinite(s.objective) || !s.grads.all_finite()) {
    throw Error("grpo: non-finite surrogate (objective " + std::to_string(s.objective) + ")");
  }
  StepStats stats{s.objective, s.clip_fraction, s.kl, 0.0};
  if (vlm::global_norm(s.grads) == 0.0) return stats;
  stats.grad_norm = optimizer.step(policy.params, s.grads, lr);
  return stats;
}

void to_json(nlohmann::json& j, const RlRecord& r) {
  j = nlohmann::json{{"step", r.step},
                     {"lr", r.lr},
                     {"mean_reward", r.mean_reward},
                     {"reward_std", r.reward_std},
                     {"mean_task", r.mean_task},
                     {"format_rate", r.format_rate},
                     {"clip_fraction", r.clip_fraction},
                     {"kl", r.kl},
                     {"wall_seconds", r.wall_seconds}};
}

RlResult run_rl(const Policy& initial, std::span<const corpus::Sample> rl_corpus, const GrpoConfig& config,
                const RlCallback& on_step) {
  config.validate();
  RlResult out{initial, {}};
  if (config.steps == 0) return out;
  if (rl_corpus.empty()) throw ArgumentError("run_rl: empty RL corpus");

  const Policy& reference = initial;
  const bool need_ref = config.kl_beta > 0;
  vlm::AdamW optimizer(initial.config, config.optimizer);
  Rng order_rng(mix_seed(config.seed, 0x5eed));
  std::vector<size_t> order(rl_corpus.size());
  std::iota(order.begin(), order.end(), 0);
  order_rng.shuffle(order);
  size_t cursor = 0;

  const auto start = std::chrono::steady_clock::now();
  for (int step = 0; step < config.steps; ++step) {
    const double lr = vlm::cosine_lr(step, config.steps, config.learning_rate, config.final_lr);
    std::vector<RolloutGroup> groups;
    const std::uint64_t step_seed = mix_seed(config.seed, static_cast<std::uint64_t>(step) + 1);
    for (int q = 0; q < config.queries_per_step; ++q) {
      if (cursor == order.size()) {
        order_rng.shuffle(order);
        cursor = 0;
      }
      const auto& query = rl_corpus[order[cursor++]];
      auto g = sample_group(out.policy, query, config.group_size, config.temperature, config.max_new_tokens,
                            mix_seed(step_seed, static_cast<std::uint64_t>(q)), config.reward,
                            need_ref ? &reference : nullptr);
      g.advantages = group_advantages(g.rewards, config.advantage_eps);
      groups.push_back(std::move(g));
    }

    RlRecord rec;
    rec.step = step;
    rec.lr = lr;
    double n = 0.0;
    double sq = 0.0;
    for (const auto& g : groups) {
      for (int i = 0; i < g.size(); ++i) {
        rec.mean_reward += g.rewards[i];
        sq += g.rewards[i] * g.rewards[i];
        rec.mean_task += g.breakdowns[i].r_task;
        rec.format_rate += g.breakdowns[i].r_format;
        n += 1.0;
      }
    }
    rec.mean_reward /= n;
    rec.mean_task /= n;
    rec.format_rate /= n;
    rec.reward_std = std::sqrt(std::max(0.0, sq / n - rec.mean_reward * rec.mean_reward));

    for (int u = 0; u < config.updates_per_batch; ++u) {
      const auto stats = grpo_step(out.policy, optimizer, groups, config, lr);
      if (u == 0) {
        rec.clip_fraction = stats.clip_fraction;
        rec.kl = stats.kl;
      }
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.log.push_back(rec);
    if (on_step) on_step(rec);
  }
  return out;
}

}  // namespace xvlm::grpo
