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

#include "xvlm/evalharness/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <set>
#include <sstream>

namespace xvlm::eval {

using corpus::Sample;
using corpus::TaskKind;
using nlohmann::json;

// ---- suites ----

void to_json(json& j, const SuiteSpec& s) {
  j = json{{"name", s.name},
           {"corpus", s.corpus},
           {"task_kind", std::string(corpus::task_kind_name(s.task_kind))},
           {"capability", s.capability},
           {"count", s.count},
           {"seed", s.seed}};
}

void from_json(const json& j, SuiteSpec& s) {
  if (!j.is_object()) throw ConfigError("suite spec must be a JSON object");
  SuiteSpec out;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "name") {
        out.name = value.get<std::string>();
      } else if (key == "corpus") {
        out.corpus = value.get<std::string>();
      } else if (key == "task_kind") {
        out.task_kind = corpus::parse_task_kind(value.get<std::string>());
      } else if (key == "capability") {
        out.capability = value.get<std::string>();
      } else if (key == "count") {
        out.count = value.get<int>();
      } else if (key == "seed") {
        out.seed = value.get<std::uint64_t>();
      } else {
        throw ConfigError("unknown suite key: " + key);
      }
    } catch (const json::exception& e) {
      throw ConfigError("suite key " + key + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw ConfigError("suite key " + key + ": " + e.what());
    }
  }
  if (out.name.empty() || out.corpus.empty()) throw ConfigError("suite spec needs a name and a corpus");
  if (out.count <= 0) throw ConfigError("suite " + out.name + ": count must be positive");
  const auto& names = corpus::generator_names();
  if (std::find(names.begin(), names.end(), out.corpus) == names.end()) {
    throw ConfigError("suite " + out.name + ": unknown corpus " + out.corpus);
  }
  s = std::move(out);
}

std::vector<SuiteSpec> default_suite_specs(std::uint64_t seed, int count) {
  return {
      {"general_mcq", "general", TaskKind::kMcq, "general", count, seed},
      {"general_grounding", "general", TaskKind::kGrounding, "general", count, seed},
      {"general_text", "general", TaskKind::kFreeText, "general", count, seed},
      {"affordance_pointing", "embodied_affordance", TaskKind::kPointing, "affordance", count, seed},
      {"affordance_grounding", "embodied_affordance", TaskKind::kGrounding, "affordance", count, seed},
      {"spatial_mcq", "embodied_spatial", TaskKind::kMcq, "spatial", count, seed},
      {"plan_mcq", "embodied_planning", TaskKind::kMcq, "plan", count, seed},
      {"drive_perception_mcq", "drive_perception", TaskKind::kMcq, "drive_perception", count, seed},
      {"drive_prediction_mcq", "drive_prediction", TaskKind::kMcq, "drive_prediction", count, seed},
      {"drive_meta_action_mcq", "drive_planning", TaskKind::kMcq, "drive_planning", count, seed},
      {"drive_trajectory", "drive_planning", TaskKind::kTrajectory, "drive_planning", count, seed},
  };
}

void assert_disjoint(const Suite& suite, const curriculum::Registry& training) {
  std::set<std::string> ids;
  for (const auto& s : suite.samples) ids.insert(s.id);
  for (const auto& [name, samples] : training) {
    for (const auto& s : samples) {
      if (ids.count(s.id)) {
        throw ConfigError("suite " + suite.name + " shares sample id " + s.id + " with training corpus " + name);
      }
    }
  }
}

Suite build_suite(const SuiteSpec& spec, const curriculum::Registry* training) {
  Suite suite{spec.name, spec.capability, corpus::Domain::kGeneral, spec.task_kind, {}};
  // Draw batches until enough samples of the requested kind have appeared.
  for (int n = std::max(2 * spec.count, 16);; n *= 2) {
    auto all = corpus::generate_corpus(spec.corpus, spec.seed, n);
    suite.samples.clear();
    for (auto& s : all) {
      if (s.task_kind != spec.task_kind) continue;
      suite.samples.push_back(std::move(s));
      if (static_cast<int>(suite.samples.size()) == spec.count) break;
    }
    if (static_cast<int>(suite.samples.size()) == spec.count) break;
    if (n > 64 * spec.count + 1024) {
      throw ConfigError("corpus " + spec.corpus + " does not produce " +
                        std::string(corpus::task_kind_name(spec.task_kind)) + " samples");
    }
  }
  suite.domain = suite.samples.front().domain;
  if (training) assert_disjoint(suite, *training);
  return suite;
}

std::vector<Suite> build_suites(const std::vector<SuiteSpec>& specs, const curriculum::Registry* training) {
  std::vector<Suite> out;
  for (const auto& spec : specs) out.push_back(build_suite(spec, training));
  return out;
}

// ---- responders ----

Responder model_responder(const Policy& policy, int max_new_tokens) {
  return [&policy, max_new_tokens](const Sample& s) {
    vlm::DecodeOptions opt;
    opt.max_new = max_new_tokens;
    opt.temperature = 0.0;
    return respond(policy, s, opt).text;
  };
}

Responder oracle_responder() {
  return [](const Sample& s) {
    return corpus::direct_response(corpus::answer_payload(s.truth, s.scene.extent, corpus::Precision::kExact));
  };
}

Responder constant_letter_responder(char letter) {
  return [letter](const Sample&) { return corpus::direct_response(std::string(1, letter)); };
}

Responder empty_responder() {
  return [](const Sample&) { return std::string(); };
}

Responder corner_point_responder() {
  return [](const Sample& s) {
    const double c = 0.5 / s.scene.extent;
    const std::string v = corpus::format_number(c, corpus::Precision::kExact);
    return corpus::direct_response("(" + v + ", " + v + ")");
  };
}

// ---- metrics ----

double pointing_success(const std::vector<std::string>& responses, const Suite& suite) {
  if (responses.size() != suite.samples.size()) {
    throw ArgumentError("pointing_success: " + std::to_string(responses.size()) + " responses for " +
                        std::to_string(suite.samples.size()) + " samples");
  }
  if (suite.samples.empty()) return 0.0;
  double hits = 0.0;
  for (size_t i = 0; i < responses.size(); ++i) {
    const auto& s = suite.samples[i];
    const auto* truth = std::get_if<corpus::PointTruth>(&s.truth);
    if (!truth) throw ArgumentError("pointing_success: sample " + s.id + " is not a pointing sample");
    const auto p = rewards::parse_response(responses[i], TaskKind::kPointing, rewards::ParseMode::kLenient);
    if (p.kind == rewards::AnswerKind::kPoint) hits += rewards::point_in_mask(p.point, truth->mask);
  }
  return hits / static_cast<double>(responses.size());
}

TrajectoryMetrics traj_l2(const std::vector<Point2>& pred, const std::vector<Point2>& gold, double dt) {
  if (pred.size() != gold.size()) {
    throw ArgumentError("traj_l2: " + std::to_string(pred.size()) + " predicted waypoints for " +
                        std::to_string(gold.size()) + " gold");
  }
  if (gold.empty()) throw ArgumentError("traj_l2: empty trajectory");
  if (!(dt > 0)) throw ArgumentError("traj_l2: dt must be positive");
  std::vector<double> err(gold.size());
  TrajectoryMetrics m;
  for (size_t i = 0; i < gold.size(); ++i) {
    err[i] = std::hypot(pred[i].x - gold[i].x, pred[i].y - gold[i].y);
    m.ade += err[i];
  }
  m.ade /= static_cast<double>(gold.size());
  for (double h : {1.0, 2.0, 3.0}) {
    const long idx = std::lround(h / dt) - 1;
    if (idx >= 0 && idx < static_cast<long>(gold.size())) m.l2_at[h] = err[idx];
  }
  return m;
}

double composite_score(const DrivingSubScores& s, const CompositeWeights& w) {
  const double total = w.ttc + w.comfort + w.ep;
  if (!(total > 0) || w.ttc < 0 || w.comfort < 0 || w.ep < 0) {
    throw ArgumentError("composite weights must be non-negative with a positive sum");
  }
  return s.nc * s.dac * (w.ttc * s.ttc + w.comfort * s.comfort + w.ep * s.ep) / total;
}

namespace {

double norm(const Point2& p) { return std::hypot(p.x, p.y); }

// Arc length along the polyline at the point closest to p.
double progress_along(const std::vector<Point2>& line, const Point2& p) {
  double best_d = std::numeric_limits<double>::infinity(), best_s = 0.0, walked = 0.0;
  for (size_t i = 1; i < line.size(); ++i) {
    const Point2& a = line[i - 1];
    const Point2& b = line[i];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len = std::hypot(dx, dy);
    double t = len > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / (len * len) : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double d = std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
    if (d < best_d) {
      best_d = d;
      best_s = walked + t * len;
    }
    walked += len;
  }
  return best_s;
}

}  // namespace

DrivingSubScores micro_sim_subscores(const std::vector<Point2>& pred, const std::vector<Point2>& gold,
                                     const corpus::Scene& scene, const SimConfig& config) {
  if (!scene.ego) throw ArgumentError("micro_sim_subscores: scene has no ego");
  if (scene.lanes.empty()) throw ArgumentError("micro_sim_subscores: scene has no lanes");
  if (pred.size() != gold.size() || pred.empty()) {
    throw ArgumentError("micro_sim_subscores: " + std::to_string(pred.size()) + " predicted waypoints for " +
                        std::to_string(gold.size()) + " gold");
  }
  DrivingSubScores s;
  s.nc = corpus::plan_collides(scene, pred, config.dt) ? 0.0 : 1.0;

  int inside = 0;
  for (const auto& p : pred) {
    bool in_lane = false;
    for (const auto& lane : scene.lanes) in_lane = in_lane || (p.x >= lane.x0 && p.x < lane.x1);
    inside += in_lane && p.y >= 0.0 && p.y < scene.extent;
  }
  s.dac = static_cast<double>(inside) / static_cast<double>(pred.size());

  s.ttc = corpus::plan_min_ttc(scene, pred, config.dt) >= config.min_ttc ? 1.0 : 0.0;

  const auto kin = corpus::ego_kinematics(*scene.ego, pred, config.dt);
  double max_a = 0.0, max_j = 0.0;
  for (const auto& a : kin.acceleration) max_a = std::max(max_a, norm(a));
  for (const auto& j : kin.jerk) max_j = std::max(max_j, norm(j));
  s.comfort = max_a <= config.max_accel && max_j <= config.max_jerk ? 1.0 : 0.0;

  std::vector<Point2> path{{scene.ego->x, scene.ego->y}};
  path.insert(path.end(), gold.begin(), gold.end());
  const double gold_progress = progress_along(path, path.back());
  s.ep = gold_progress > 0.0 ? std::clamp(progress_along(path, pred.back()) / gold_progress, 0.0, 1.0) : 1.0;

  s.composite = composite_score(s, config.weights);
  return s;
}

// ---- suite runs ----

namespace {

struct Accumulator {
  std::map<std::string, double> sums;
  void add(const std::string& key, double v) { sums[key] += v; }
};

}  // namespace

SuiteResult run_suite(const Responder& respond, const Suite& suite, const RunOptions& options) {
  if (suite.samples.empty()) throw ArgumentError("suite " + suite.name + " is empty");
  SuiteResult r{suite.name, suite.capability, suite.task_kind, static_cast<int>(suite.samples.size()), {}, {}};
  Accumulator acc;
  std::vector<std::string> responses;
  responses.reserve(suite.samples.size());
  for (const auto& s : suite.samples) {
    if (s.task_kind != suite.task_kind) throw ArgumentError("suite " + suite.name + " mixes task kinds");
    std::string text;
    try {
      text = respond(s);
    } catch (const Error&) {
      text.clear();
    }
    responses.push_back(text);
    const auto parsed = rewards::parse_response(text, s.task_kind, options.reward.mode);
    acc.add("format_rate", rewards::format_check(text) ? 1.0 : 0.0);
    bool parsed_ok = parsed.kind != rewards::AnswerKind::kNone;
    switch (s.task_kind) {
      case TaskKind::kMcq:
        acc.add("accuracy", rewards::task_score(s, parsed, options.reward));
        break;
      case TaskKind::kPointing:
        acc.add("pointing_success", rewards::task_score(s, parsed, options.reward));
        break;
      case TaskKind::kGrounding: {
        const double iou = rewards::task_score(s, parsed, options.reward);
        acc.add("mean_iou", iou);
        acc.add("acc_iou50", iou >= 0.5 ? 1.0 : 0.0);
        break;
      }
      case TaskKind::kFreeText:
        acc.add("exact_match", rewards::task_score(s, parsed, options.reward));
        break;
      case TaskKind::kTrajectory: {
        const auto& truth = std::get<corpus::TrajectoryTruth>(s.truth);
        const double extent = s.scene.extent;
        parsed_ok = parsed.kind == rewards::AnswerKind::kTrajectory &&
                    parsed.trajectory.size() == truth.waypoints.size();
        std::vector<Point2> pred;
        if (parsed_ok) {
          for (const auto& p : parsed.trajectory) pred.push_back({p.x * extent, p.y * extent});
        } else {
          pred.assign(truth.waypoints.size(), Point2{s.scene.ego->x, s.scene.ego->y});
        }
        const auto l2 = traj_l2(pred, truth.waypoints, truth.dt);
        for (const auto& [h, v] : l2.l2_at) {
          char key[48];
          std::snprintf(key, sizeof(key), "l2_%gs", h);
          acc.add(key, v);
        }
        acc.add("ade", l2.ade);
        DrivingSubScores sub;
        if (parsed_ok) sub = micro_sim_subscores(pred, truth.waypoints, s.scene, options.sim);
        acc.add("nc", sub.nc);
        acc.add("dac", sub.dac);
        acc.add("ttc", sub.ttc);
        acc.add("comfort", sub.comfort);
        acc.add("ep", sub.ep);
        acc.add("composite", sub.composite);
        break;
      }
    }
    if (!parsed_ok) r.failures.push_back(s.id);
  }
  const double n = static_cast<double>(suite.samples.size());
  for (const auto& [k, v] : acc.sums) r.metrics[k] = v / n;
  static const std::map<TaskKind, std::string> kPrimary{{TaskKind::kMcq, "accuracy"},
                                                        {TaskKind::kPointing, "pointing_success"},
                                                        {TaskKind::kGrounding, "acc_iou50"},
                                                        {TaskKind::kFreeText, "exact_match"},
                                                        {TaskKind::kTrajectory, "composite"}};
  r.metrics["score"] = r.metrics.at(kPrimary.at(suite.task_kind));
  return r;
}

std::map<std::string, double> summarize(const std::vector<SuiteResult>& results) {
  std::map<std::string, std::pair<double, int>> caps;
  double mcq = 0.0, point = 0.0;
  int n_mcq = 0, n_point = 0;
  for (const auto& r : results) {
    auto& c = caps[r.capability];
    c.first += r.score();
    c.second += 1;
    if (r.task_kind == TaskKind::kMcq) {
      mcq += r.metrics.at("accuracy") * r.samples;
      n_mcq += r.samples;
    } else if (r.task_kind == TaskKind::kPointing) {
      point += r.metrics.at("pointing_success") * r.samples;
      n_point += r.samples;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [name, c] : caps) out[name] = c.first / c.second;
  auto average = [&](std::initializer_list<const char*> names) -> std::optional<double> {
    double sum = 0.0;
    for (const char* name : names) {
      auto it = out.find(name);
      if (it == out.end()) return std::nullopt;
      sum += it->second;
    }
    return sum / static_cast<double>(names.size());
  };
  if (auto v = average({"affordance", "spatial", "plan"})) out["embodied_avg"] = *v;
  if (auto v = average({"drive_perception", "drive_prediction", "drive_planning"})) out["driving_avg"] = *v;
  if (n_mcq) out["mcq_accuracy"] = mcq / n_mcq;
  if (n_point) out["pointing_success"] = point / n_point;
  return out;
}

std::string report_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json MetricReport::to_json() const {
  json suites_json = json::array();
  for (const auto& r : suites) {
    suites_json.push_back({{"suite", r.suite},
                           {"capability", r.capability},
                           {"task_kind", std::string(corpus::task_kind_name(r.task_kind))},
                           {"samples", r.samples},
                           {"metrics", r.metrics},
                           {"failures", r.failures}});
  }
  return json{{"provenance",
               {{"checkpoint_digest", provenance.checkpoint_digest},
                {"config_digest", provenance.config_digest},
                {"suite_seed", provenance.suite_seed},
                {"responder", provenance.responder},
                {"timestamp", provenance.timestamp}}},
              {"suites", suites_json},
              {"summary", summary}};
}

MetricReport evaluate(const Responder& respond, const std::vector<Suite>& suites, Provenance provenance,
                      const RunOptions& options) {
  MetricReport report;
  if (provenance.timestamp.empty()) provenance.timestamp = report_timestamp();
  report.provenance = std::move(provenance);
  for (const auto& suite : suites) report.suites.push_back(run_suite(respond, suite, options));
  report.summary = summarize(report.suites);
  return report;
}

// ---- ablation ----

namespace {

const std::vector<std::string> kRequiredVariants{"baseline", "embodied_only", "ad_only", "mixed", "multi_stage"};

std::vector<curriculum::MixtureEntry> uniform(const std::vector<std::vector<std::string>>& groups) {
  std::vector<std::string> names;
  for (const auto& g : groups) names.insert(names.end(), g.begin(), g.end());
  std::sort(names.begin(), names.end());
  std::vector<curriculum::MixtureEntry> out;
  for (auto& n : names) out.push_back({n, 1.0});
  return out;
}

long planned_tokens(const AblationVariant& v, const curriculum::Registry& registry, std::uint64_t seed) {
  long total = 0;
  for (const auto& s : v.stages) total += s.token_budget > 0 ? s.token_budget : curriculum::measure_tokens(s, registry, seed);
  return total;
}

void check_budgets(const std::vector<std::pair<std::string, long>>& tokens) {
  long most = 0;
  for (const auto& [name, t] : tokens) most = std::max(most, t);
  for (const auto& [name, t] : tokens) {
    if (static_cast<double>(most - t) > kBudgetTolerance * static_cast<double>(most)) {
      throw ConfigError("ablation variant " + name + " uses " + std::to_string(t) + " loss tokens against " +
                        std::to_string(most) + " for the largest variant (over 1% apart)");
    }
  }
}

}  // namespace

std::vector<AblationVariant> standard_variants(const std::vector<curriculum::StageConfig>& stages,
                                               const curriculum::Registry& registry, std::uint64_t seed) {
  std::vector<curriculum::StageConfig> sft;
  for (const auto& s : stages) {
    if (s.stage_id <= 3) sft.push_back(s);
  }
  if (sft.empty()) throw ConfigError("ablation needs supervised stages");
  AblationVariant multi{"multi_stage", sft};
  const long total = planned_tokens(multi, registry, seed);
  auto single = [&](const std::string& name, std::vector<curriculum::MixtureEntry> mixture) {
    curriculum::StageConfig s = sft.front();
    s.stage_id = 1;
    s.mixture = std::move(mixture);
    s.token_budget = total;
    return AblationVariant{name, {s}};
  };
  const auto& gen = curriculum::general_corpora();
  const auto& emb = curriculum::embodied_corpora();
  const auto& drv = curriculum::driving_corpora();
  return {AblationVariant{"baseline", {}}, single("embodied_only", uniform({gen, emb})),
          single("ad_only", uniform({gen, drv})), single("mixed", uniform({gen, emb, drv})), multi};
}

const AblationRow& AblationTable::row(const std::string& variant) const {
  for (const auto& r : rows) {
    if (r.variant == variant) return r;
  }
  throw ArgumentError("no ablation row " + variant);
}

std::string AblationTable::to_text() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %10s %8s %6s %13s %8s %12s\n", "variant", "affordance", "spatial", "plan",
                "embodied_avg", "driving", "loss_tokens");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-14s %10.1f %8.1f %6.1f %13.1f %8.1f %12ld\n", r.variant.c_str(),
                  100 * r.affordance, 100 * r.spatial, 100 * r.plan, 100 * r.embodied_avg, 100 * r.driving,
                  r.loss_tokens);
    out << line;
  }
  return out.str();
}

std::string AblationTable::to_csv() const {
  std::ostringstream out;
  out << "variant,affordance,spatial,plan,embodied_avg,driving,loss_tokens\n";
  char line[200];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%ld\n", r.variant.c_str(), r.affordance, r.spatial,
                  r.plan, r.embodied_avg, r.driving, r.loss_tokens);
    out << line;
  }
  return out.str();
}

json AblationTable::to_json() const {
  json j = json::array();
  for (const auto& r : rows) {
    j.push_back({{"variant", r.variant},
                 {"affordance", r.affordance},
                 {"spatial", r.spatial},
                 {"plan", r.plan},
                 {"embodied_avg", r.embodied_avg},
                 {"driving", r.driving},
                 {"loss_tokens", r.loss_tokens}});
  }
  return j;
}

AblationTable ablation_matrix(const std::vector<AblationVariant>& variants, const vlm::ModelConfig& model,
                              std::uint64_t seed, const curriculum::Registry& registry,
                              const std::vector<Suite>& suites, const curriculum::StageHooks& hooks) {
  for (const auto& name : kRequiredVariants) {
    const bool found = std::any_of(variants.begin(), variants.end(), [&](const auto& v) { return v.name == name; });
    if (!found) throw ConfigError("ablation is missing the " + name + " variant");
  }
  for (const auto& suite : suites) assert_disjoint(suite, registry);

  std::vector<std::pair<std::string, long>> planned;
  for (const auto& v : variants) {
    if (!v.stages.empty()) planned.emplace_back(v.name, planned_tokens(v, registry, seed));
  }
  check_budgets(planned);

  AblationTable table;
  std::vector<std::pair<std::string, long>> consumed;
  for (const auto& v : variants) {
    auto state = curriculum::TrainState::fresh(model, seed);
    for (const auto& stage : v.stages) state = curriculum::run_stage(std::move(state), stage, registry, hooks).first;
    if (!v.stages.empty()) consumed.emplace_back(v.name, state.loss_tokens);
    std::vector<SuiteResult> results;
    const auto responder = model_responder(state.policy);
    for (const auto& suite : suites) results.push_back(run_suite(responder, suite));
    const auto summary = summarize(results);
    auto get = [&](const char* key) {
      auto it = summary.find(key);
      return it == summary.end() ? 0.0 : it->second;
    };
    table.rows.push_back({v.name, get("affordance"), get("spatial"), get("plan"), get("embodied_avg"),
                          get("driving_avg"), state.loss_tokens});
  }
  check_budgets(consumed);
  return table;
}

// ---- plots ----

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

constexpr double kW = 640, kH = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;

std::string frame(const std::string& title, const std::string& x_label, double y0, double y1) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW
    << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\"" << kH - kBottom
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom
    << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">"
    << escape(x_label) << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y0 + (y1 - y0) * i / 4.0;
    const double y = kH - kBottom - (kH - kTop - kBottom) * i / 4.0;
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick(v) << "</text>\n";
  }
  return o.str();
}

std::pair<double, double> span_of(const std::vector<Series>& series, bool ys, bool include_zero) {
  double lo = include_zero ? 0.0 : std::numeric_limits<double>::infinity();
  double hi = include_zero ? 0.0 : -std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    for (double v : ys ? s.y : s.x) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  if (hi <= lo) hi = lo + 1.0;
  return {lo, hi};
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::vector<Series>& series) {
  const auto [x0, x1] = span_of(series, false, false);
  const auto [y0, y1] = span_of(series, true, false);
  std::ostringstream o;
  o << frame(title, x_label, y0, y1);
  for (size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      const double px = kLeft + (kW - kLeft - kRight) * (s.x[i] - x0) / (x1 - x0);
      const double py = kH - kBottom - (kH - kTop - kBottom) * (s.y[i] - y0) / (y1 - y0);
      o << num(px) << ',' << num(py) << ' ';
    }
    o << "\"/>\n<text x=\"" << kW - kRight - 4 << "\" y=\"" << kTop + 14 * k << "\" text-anchor=\"end\" fill=\""
      << color << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& groups,
                          const std::vector<Series>& bars) {
  const auto [y0, y1] = span_of(bars, true, true);
  std::ostringstream o;
  o << frame(title, "", y0, y1);
  const double plot_w = kW - kLeft - kRight;
  const double group_w = groups.empty() ? plot_w : plot_w / static_cast<double>(groups.size());
  const double bar_w = bars.empty() ? group_w : 0.8 * group_w / static_cast<double>(bars.size());
  for (size_t g = 0; g < groups.size(); ++g) {
    const double gx = kLeft + g * group_w;
    o << "<text x=\"" << num(gx + group_w / 2) << "\" y=\"" << kH - kBottom + 16 << "\" text-anchor=\"middle\">"
      << escape(groups[g]) << "</text>\n";
    for (size_t b = 0; b < bars.size(); ++b) {
      if (g >= bars[b].y.size() || !std::isfinite(bars[b].y[g])) continue;
      const double h = (kH - kTop - kBottom) * (bars[b].y[g] - y0) / (y1 - y0);
      o << "<rect x=\"" << num(gx + 0.1 * group_w + b * bar_w) << "\" y=\"" << num(kH - kBottom - h) << "\" width=\""
        << num(bar_w) << "\" height=\"" << num(h) << "\" fill=\"" << kPalette[b % std::size(kPalette)] << "\"/>\n";
    }
  }
  for (size_t b = 0; b < bars.size(); ++b) {
    o << "<text x=\"" << kW - kRight - 4 << "\" y=\"" << kTop + 14 * b << "\" text-anchor=\"end\" fill=\""
      << kPalette[b % std::size(kPalette)] << "\">" << escape(bars[b].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace xvlm::eval
