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
#include <string>
#include <string_view>
#include <vector>

#include "xvlm/synthcorpus/sample.hpp"

namespace xvlm::corpus {

// Fixed driving-scene geometry shared by generators and the simulator.
struct DriveLayout {
  static constexpr double kRoadLeft = 4.0;
  static constexpr double kLaneWidth = 8.0;
  static constexpr int kLanes = 3;
  static constexpr double kEgoX = 16.0;
  static constexpr double kEgoY = 27.0;
  static constexpr double kEgoRadius = 2.0;
  // Look-ahead distance for the stop rule, in pixels between centers.
  static constexpr double kStopDistance = 12.0;
  static constexpr double kCurvature = 0.06;
  static constexpr double kTurnThreshold = 0.3;  // rad/s
  static constexpr double kHorizon = 3.0;        // s
  static constexpr double kWaypointDt = 0.5;     // s
  static constexpr double kPredictionGap = 1.0;  // s between stacked frames
  static constexpr double kMinTtc = 1.0;         // s
};

std::vector<Lane> drive_lanes();

// Lane index (0-based from the left) containing x, or -1 off-road.
int lane_of(double x);

// Ego waypoints at dt, 2 dt, ..., horizon under constant speed and
// curvature (positive curvature turns right on screen).
std::vector<Point2> arc_waypoints(const EgoState& ego, double curvature, double horizon, double dt);

// Finite-difference kinematics of an ego plan. Index 0 holds the ego start
// state; index k >= 1 follows waypoint k. Acceleration starts at k = 1 and
// jerk at k = 2.
struct EgoKinematics {
  std::vector<Point2> position;
  std::vector<Point2> velocity;
  std::vector<Point2> acceleration;
  std::vector<Point2> jerk;
};

EgoKinematics ego_kinematics(const EgoState& ego, const std::vector<Point2>& waypoints, double dt);

// True when the ego disk swept from waypoint k-1 to waypoint k touches the
// circumscribed disk of any agent at time k dt.
bool plan_collides(const Scene& scene, const std::vector<Point2>& waypoints, double dt);

// Smallest time to contact between the ego and any agent when both keep
// their velocity at some waypoint. Infinity when nothing ever closes in.
double plan_min_ttc(const Scene& scene, const std::vector<Point2>& waypoints, double dt);

// Intent of an agent over the prediction horizon: "go straight", "turn left",
// or "turn right".
std::string agent_intent(const SceneObject& agent);

struct GenOptions {
  int extent = 32;
};

std::vector<Sample> gen_general(std::uint64_t seed, int n, const GenOptions& options = {});
std::vector<Sample> gen_embodied_affordance(std::uint64_t seed, int n, const GenOptions& options = {});
std::vector<Sample> gen_embodied_spatial(std::uint64_t seed, int n, const GenOptions& options = {});
std::vector<Sample> gen_embodied_planning(std::uint64_t seed, int n, const GenOptions& options = {});
std::vector<Sample> gen_drive_perception(std::uint64_t seed, int n, const GenOptions& options = {});
std::vector<Sample> gen_drive_prediction(std::uint64_t seed, int n, const GenOptions& options = {});
std::vector<Sample> gen_drive_planning(std::uint64_t seed, int n, const GenOptions& options = {});

// Names accepted by generate_corpus.
const std::vector<std::string>& generator_names();
std::vector<Sample> generate_corpus(std::string_view name, std::uint64_t seed, int n,
                                    const GenOptions& options = {});

}  // namespace xvlm::corpus
