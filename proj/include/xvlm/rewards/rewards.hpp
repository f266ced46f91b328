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
#include <vector>

#include "xvlm/synthcorpus/sample.hpp"

namespace xvlm::rewards {

using corpus::Box;
using corpus::Mask;
using corpus::Point2;

// ---- response template ----

// 1 iff the text is exactly `<think>` CHARS `</think>` WS `<answer>` CHARS
// `</answer>` with no other tag occurrences and nothing after the answer.
bool format_check(std::string_view text);

struct Stripped {
  std::string text;
  bool compliant = false;
};

// Answer segment when the template parses, otherwise the raw text.
Stripped strip_think(std::string_view text);

// ---- parsing ----

enum class AnswerKind { kNone, kLetter, kPoint, kBox, kTrajectory, kText };

struct ParsedResponse {
  bool format_ok = false;
  AnswerKind kind = AnswerKind::kNone;
  char letter = 0;
  Point2 point;
  Box box;
  std::vector<Point2> trajectory;  // normalized coordinates
  std::string text;
};

enum class ParseMode {
  kStrict,   // template required, payload must match the grammar exactly
  kLenient,  // falls back to regex extraction anywhere in the text
};

// Never throws. Coordinates outside [0, 1] or malformed boxes yield kNone.
ParsedResponse parse_response(std::string_view text, corpus::TaskKind expected,
                              ParseMode mode = ParseMode::kLenient);

// ---- task rewards ----

double reward_mcq(const ParsedResponse& parsed, const corpus::ChoiceTruth& truth);

// Intersection over union of well-formed boxes (x0 < x1, y0 < y1).
double box_iou(const Box& a, const Box& b);

// 1 iff the pixel containing the normalized point is set.
double point_in_mask(const Point2& point, const Mask& mask);

struct TrajectoryError {
  double ade = 0.0;
  double fde = 0.0;
};

// Errors in pixels between equally long normalized prediction and pixel gold.
TrajectoryError trajectory_error(const std::vector<Point2>& pred_normalized,
                                 const std::vector<Point2>& gold_pixels, int extent);

struct RewardConfig {
  double format_weight = 0.1;
  bool gate_on_format = false;
  ParseMode mode = ParseMode::kStrict;
  bool trajectory_shaping = true;
  double trajectory_sigma = 1.0;  // pixels
};

struct RewardBreakdown {
  double r_task = 0.0;
  double r_format = 0.0;
  double total = 0.0;
  bool operator==(const RewardBreakdown&) const = default;
};

// Task score in [0, 1] for an already parsed response.
double task_score(const corpus::Sample& sample, const ParsedResponse& parsed, const RewardConfig& config);

RewardBreakdown total_reward(const corpus::Sample& sample, std::string_view text,
                             const RewardConfig& config = {});

void to_json(nlohmann::json& j, const RewardConfig& c);
void from_json(const nlohmann::json& j, RewardConfig& c);

}  // namespace xvlm::rewards
