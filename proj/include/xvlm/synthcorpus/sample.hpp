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

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "xvlm/common.hpp"
#include "xvlm/synthcorpus/scene.hpp"

namespace xvlm::corpus {

inline constexpr int kFormatVersion = 1;

enum class Domain { kGeneral, kEmbodied, kDriving };
enum class TaskKind { kMcq, kPointing, kGrounding, kTrajectory, kFreeText };

std::string_view domain_name(Domain d);
std::string_view task_kind_name(TaskKind k);
Domain parse_domain(std::string_view s);
TaskKind parse_task_kind(std::string_view s);

struct ChoiceTruth {
  char letter = 'A';
  std::vector<std::string> options;  // options[i] is labelled 'A' + i
  const std::string& correct() const { return options.at(letter - 'A'); }
  bool operator==(const ChoiceTruth&) const = default;
};

struct PointTruth {
  Mask mask;
  bool operator==(const PointTruth&) const = default;
};

struct BoxTruth {
  Box box;
  bool operator==(const BoxTruth&) const = default;
};

// Waypoints in pixels at t = dt, 2 dt, ...
struct TrajectoryTruth {
  double dt = 0.5;
  std::vector<Point2> waypoints;
  bool operator==(const TrajectoryTruth&) const = default;
};

struct TextTruth {
  std::string text;
  bool operator==(const TextTruth&) const = default;
};

using GroundTruth = std::variant<ChoiceTruth, PointTruth, BoxTruth, TrajectoryTruth, TextTruth>;

TaskKind task_kind_of(const GroundTruth& truth);

struct Sample {
  std::string id;
  std::string corpus;
  Domain domain = Domain::kGeneral;
  TaskKind task_kind = TaskKind::kMcq;
  std::string subtask;
  std::string prompt;
  std::vector<Image> images;
  GroundTruth truth;
  Scene scene;
  // Question parameters (referenced objects, relation, script, route) that
  // let an oracle re-derive the truth from the scene.
  nlohmann::json question = nlohmann::json::object();
  bool cot = false;
  // Supervised response text; empty means "derive the direct answer".
  std::string target;

  bool operator==(const Sample&) const;
};

// Canonical target pixel of a mask: the pixel holding the centroid of the
// set pixel centers when that pixel is set, otherwise the set pixel closest
// to the centroid (lowest row-major index on ties). Returned as the pixel
// center in canvas units.
Point2 canonical_point(const Mask& mask);

enum class Precision { kGrid, kExact };

// Numbers in answers: kGrid prints three decimals, kExact round-trips.
std::string format_number(double v, Precision precision);

// The text inside <answer>...</answer> for a ground truth. Coordinates are
// normalized by the canvas extent.
std::string answer_payload(const GroundTruth& truth, int extent, Precision precision = Precision::kGrid);

// Full response with an empty reasoning block.
std::string direct_response(std::string_view payload);

// Target text used for supervised training.
std::string training_target(const Sample& sample);

// "Question\nA. x\nB. y..." rendering used by MCQ prompts.
std::string mcq_prompt(std::string_view question, const std::vector<std::string>& options);

void to_json(nlohmann::json& j, const GroundTruth& truth);
GroundTruth truth_from_json(const nlohmann::json& j);

}  // namespace xvlm::corpus
