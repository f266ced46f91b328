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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xvlm/curriculum/curriculum.hpp"
#include "xvlm/policy.hpp"
#include "xvlm/rewards/rewards.hpp"
#include "xvlm/synthcorpus/generators.hpp"

namespace xvlm::eval {

using corpus::Point2;

// ---- suites ----

struct SuiteSpec {
  std::string name;
  std::string corpus;  // generator name
  corpus::TaskKind task_kind = corpus::TaskKind::kMcq;
  // Capability column the suite reports under.
  std::string capability;
  int count = 100;
  std::uint64_t seed = 0;
  bool operator==(const SuiteSpec&) const = default;
};

void to_json(nlohmann::json& j, const SuiteSpec& s);
void from_json(const nlohmann::json& j, SuiteSpec& s);

struct Suite {
  std::string name;
  std::string capability;
  corpus::Domain domain = corpus::Domain::kGeneral;
  corpus::TaskKind task_kind = corpus::TaskKind::kMcq;
  std::vector<corpus::Sample> samples;
};

// One suite per (corpus, task kind) pair the generators produce, all drawn
// from `seed`. Capabilities: general, affordance, spatial, plan,
// drive_perception, drive_prediction, drive_planning.
std::vector<SuiteSpec> default_suite_specs(std::uint64_t seed, int count = 100);

// Generates `count` samples of the spec's task kind. Throws ConfigError when
// a sample id also occurs in `training`.
Suite build_suite(const SuiteSpec& spec, const curriculum::Registry* training = nullptr);
std::vector<Suite> build_suites(const std::vector<SuiteSpec>& specs, const curriculum::Registry* training = nullptr);

// Throws ConfigError naming the first shared id.
void assert_disjoint(const Suite& suite, const curriculum::Registry& training);

// ---- responders ----

using Responder = std::function<std::string(const corpus::Sample&)>;

inline constexpr int kEvalMaxNewTokens = 160;

// Greedy decoding with the given policy, which must outlive the responder.
Responder model_responder(const Policy& policy, int max_new_tokens = kEvalMaxNewTokens);
// The gold answer in the response template, with exact coordinates and the
// canonical mask point for pointing.
Responder oracle_responder();
Responder constant_letter_responder(char letter);
Responder empty_responder();
// Always points at the top-left pixel center.
Responder corner_point_responder();

// ---- metrics ----

// Fraction of responses whose parsed point falls inside the suite's mask;
// unparseable responses fail. Responses align with suite.samples.
double pointing_success(const std::vector<std::string>& responses, const Suite& suite);

struct TrajectoryMetrics {
  std::map<double, double> l2_at;  // horizon seconds -> error at the closing waypoint
  double ade = 0.0;
};

// Euclidean errors in the inputs' units. Horizons 1, 2 and 3 s are reported
// when the trajectory reaches them. Throws ArgumentError on a length mismatch
// or empty input.
TrajectoryMetrics traj_l2(const std::vector<Point2>& pred, const std::vector<Point2>& gold, double dt = 0.5);

struct CompositeWeights {
  double ttc = 5.0;
  double comfort = 2.0;
  double ep = 5.0;
};

struct SimConfig {
  double dt = corpus::DriveLayout::kWaypointDt;
  double max_accel = 4.0;  // canvas units / s^2
  double max_jerk = 8.0;   // canvas units / s^3
  double min_ttc = corpus::DriveLayout::kMinTtc;
  CompositeWeights weights;
};

struct DrivingSubScores {
  double nc = 0.0;
  double dac = 0.0;
  double ttc = 0.0;
  double comfort = 0.0;
  double ep = 0.0;
  double composite = 0.0;
};

// NC * DAC * weighted mean of (TTC, Comfort, EP).
double composite_score(const DrivingSubScores& sub, const CompositeWeights& weights = {});

// Rule-based sub-scores of a pixel-space plan against the scene and the gold
// plan. Throws ArgumentError for a scene without ego or lanes, or when pred and
// gold differ in length.
DrivingSubScores micro_sim_subscores(const std::vector<Point2>& pred, const std::vector<Point2>& gold,
                                     const corpus::Scene& scene, const SimConfig& config = {});

// ---- suite runs and reports ----

struct RunOptions {
  // Task scoring parses leniently; format_rate always uses the strict check.
  rewards::RewardConfig reward{0.1, false, rewards::ParseMode::kLenient, true, 1.0};
  SimConfig sim;
};

struct SuiteResult {
  std::string suite;
  std::string capability;
  corpus::TaskKind task_kind = corpus::TaskKind::kMcq;
  int samples = 0;
  // Suite-level means. Always has "score" (the primary metric) and
  // "format_rate".
  std::map<std::string, double> metrics;
  // Ids of samples whose response could not be parsed.
  std::vector<std::string> failures;

  double score() const { return metrics.at("score"); }
};

// Responses come from `respond`, one per sample in order. Primary metrics:
// accuracy (MCQ), pointing success, IoU >= 0.5 rate (grounding), exact match
// (free text), composite (trajectory). An unparseable trajectory scores 0 on
// every sub-score and is measured as a stationary plan for L2.
SuiteResult run_suite(const Responder& respond, const Suite& suite, const RunOptions& options = {});

// Capability means of suite scores, "embodied_avg" over affordance, spatial
// and plan, "driving_avg" uniformly over the three driving capabilities, and
// sample-pooled "mcq_accuracy" and "pointing_success".
std::map<std::string, double> summarize(const std::vector<SuiteResult>& results);

struct Provenance {
  std::string checkpoint_digest;
  std::string config_digest;
  std::uint64_t suite_seed = 0;
  std::string responder;
  // UTC ISO-8601 from SOURCE_DATE_EPOCH when set, otherwise the clock.
  std::string timestamp;
};

std::string report_timestamp();

struct MetricReport {
  Provenance provenance;
  std::vector<SuiteResult> suites;
  std::map<std::string, double> summary;

  nlohmann::json to_json() const;
};

MetricReport evaluate(const Responder& respond, const std::vector<Suite>& suites, Provenance provenance,
                      const RunOptions& options = {});

// ---- ablation ----

struct AblationVariant {
  std::string name;
  // Supervised stages trained in order; empty means the untrained model.
  std::vector<curriculum::StageConfig> stages;
};

// baseline, embodied_only, ad_only, mixed (one stage over the stage-2 set)
// and multi_stage (the given stages 1-3). Single-stage variants receive the
// multi-stage loss-token total as their budget.
std::vector<AblationVariant> standard_variants(const std::vector<curriculum::StageConfig>& stages,
                                               const curriculum::Registry& registry, std::uint64_t seed);

struct AblationRow {
  std::string variant;
  double affordance = 0.0;
  double spatial = 0.0;
  double plan = 0.0;
  double embodied_avg = 0.0;
  double driving = 0.0;
  long loss_tokens = 0;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  const AblationRow& row(const std::string& variant) const;
  std::string to_text() const;
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

inline constexpr double kBudgetTolerance = 0.01;

// Trains every variant from the same initial state (model seed and `seed`)
// and evaluates all suites with greedy decoding. Throws ConfigError unless the
// required variants are present and every trained variant's loss tokens are
// within 1% of the largest budget.
AblationTable ablation_matrix(const std::vector<AblationVariant>& variants, const vlm::ModelConfig& model,
                              std::uint64_t seed, const curriculum::Registry& registry,
                              const std::vector<Suite>& suites, const curriculum::StageHooks& hooks = {});

// ---- plots ----

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Self-contained SVG documents.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::vector<Series>& series);
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& groups,
                          const std::vector<Series>& bars);

}  // namespace xvlm::eval
