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

#include "xvlm/tinyvlm/optim.hpp"

#include <cmath>

namespace xvlm::vlm {

void to_json(nlohmann::json& j, const AdamWConfig& c) {
  j = nlohmann::json{{"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"eps", c.eps},
                     {"weight_decay", c.weight_decay},
                     {"grad_clip", c.grad_clip}};
}

void from_json(const nlohmann::json& j, AdamWConfig& c) {
  if (!j.is_object()) throw ConfigError("optimizer config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "beta1") {
      c.beta1 = value.get<double>();
    } else if (key == "beta2") {
      c.beta2 = value.get<double>();
    } else if (key == "eps") {
      c.eps = value.get<double>();
    } else if (key == "weight_decay") {
      c.weight_decay = value.get<double>();
    } else if (key == "grad_clip") {
      c.grad_clip = value.get<double>();
    } else {
      throw ConfigError("unknown optimizer key: " + key);
    }
  }
  if (!(c.beta1 >= 0 && c.beta1 < 1 && c.beta2 >= 0 && c.beta2 < 1)) throw ConfigError("betas must lie in [0, 1)");
  if (!(c.eps > 0)) throw ConfigError("optimizer eps must be positive");
  if (!(c.weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
  if (!(c.grad_clip >= 0)) throw ConfigError("grad_clip must be non-negative");
}

bool decays(const std::string& name) {
  if (name == "decoder.lm_head") return true;
  return name.size() > 2 && name.compare(name.size() - 2, 2, ".w") == 0;
}

double global_norm(const Parameters& grads) {
  double sq = 0.0;
  for (const auto& [_, g] : grads.named()) sq += g->squaredNorm();
  return std::sqrt(sq);
}

double cosine_lr(long step, long max_steps, double base, double final) {
  if (max_steps <= 0) throw ArgumentError("cosine_lr: max_steps must be positive");
  if (step < 0 || step > max_steps) throw ArgumentError("cosine_lr: step outside [0, max_steps]");
  if (step == 0) return base;
  if (step == max_steps) return final;
  const double progress = static_cast<double>(step) / static_cast<double>(max_steps);
  return final + 0.5 * (base - final) * (1.0 + std::cos(M_PI * progress));
}

AdamW::AdamW(const ModelConfig& config, AdamWConfig options)
    : options_(options), m_(Parameters::zeros(config)), v_(Parameters::zeros(config)) {}

void AdamW::reset() {
  m_.set_zero();
  v_.set_zero();
  t_ = 0;
}

double AdamW::step(Parameters& params, const Parameters& grads, double lr) {
  const double norm = global_norm(grads);
  if (!std::isfinite(norm)) throw Error("non-finite gradient norm");
  const double scale = options_.grad_clip > 0 && norm > options_.grad_clip ? options_.grad_clip / norm : 1.0;
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto p = params.named();
  auto g = grads.named();
  auto m = m_.named();
  auto v = v_.named();
  for (size_t i = 0; i < p.size(); ++i) {
    Mat& w = *p[i].second;
    auto gi = g[i].second->array() * scale;
    m[i].second->array() = b1 * m[i].second->array() + (1 - b1) * gi;
    v[i].second->array() = b2 * v[i].second->array() + (1 - b2) * gi.square();
    if (options_.weight_decay > 0 && decays(p[i].first)) w.array() *= 1.0 - lr * options_.weight_decay;
    w.array() -= lr * (m[i].second->array() / c1) / ((v[i].second->array() / c2).sqrt() + options_.eps);
  }
  return norm;
}

std::vector<std::pair<std::string, Mat>> AdamW::export_state() const {
  std::vector<std::pair<std::string, Mat>> out;
  for (const auto& [name, m] : m_.named()) out.emplace_back("adam.m." + name, *m);
  for (const auto& [name, v] : v_.named()) out.emplace_back("adam.v." + name, *v);
  Mat t(1, 1);
  t(0, 0) = static_cast<double>(t_);
  out.emplace_back("adam.t", t);
  return out;
}

void AdamW::import_state(const std::vector<std::pair<std::string, Mat>>& extras) {
  auto m = m_.named();
  auto v = v_.named();
  size_t found = 0;
  bool have_t = false;
  for (const auto& [name, value] : extras) {
    auto assign = [&](auto& list, const std::string& prefix) {
      if (name.rfind(prefix, 0) != 0) return;
      const std::string key = name.substr(prefix.size());
      for (auto& [n, mat] : list) {
        if (n != key) continue;
        if (mat->rows() != value.rows() || mat->cols() != value.cols())
          throw ArgumentError("optimizer state shape mismatch for " + name);
        *mat = value;
        ++found;
      }
    };
    assign(m, "adam.m.");
    assign(v, "adam.v.");
    if (name == "adam.t") {
      t_ = static_cast<long>(value(0, 0));
      have_t = true;
    }
  }
  if (found != m.size() + v.size() || !have_t) throw ArgumentError("incomplete optimizer state");
}

}  // namespace xvlm::vlm
