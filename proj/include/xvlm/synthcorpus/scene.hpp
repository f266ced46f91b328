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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "xvlm/common.hpp"

namespace xvlm::corpus {

enum class Shape { kCircle, kSquare, kTriangle };
enum class Color { kRed, kGreen, kBlue, kYellow, kPurple };
enum class ObjectKind { kStatic, kAgent };

inline constexpr Shape kAllShapes[] = {Shape::kCircle, Shape::kSquare, Shape::kTriangle};
inline constexpr Color kAllColors[] = {Color::kRed, Color::kGreen, Color::kBlue, Color::kYellow, Color::kPurple};

std::string_view shape_name(Shape s);
std::string_view shape_plural(Shape s);
std::string_view color_name(Color c);
Shape parse_shape(std::string_view s);
Color parse_color(std::string_view s);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

// A filled primitive. `radius` is the half-extent: circles use it as the
// radius, squares as half the side, and triangles (apex up) span
// [cx - r, cx + r] x [cy - r, cy + r]. Agents carry planar kinematics with
// heading measured in pixel coordinates (x right, y down).
struct SceneObject {
  Shape shape = Shape::kCircle;
  Color color = Color::kRed;
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;
  ObjectKind kind = ObjectKind::kStatic;
  double heading = 0.0;
  double speed = 0.0;
  double heading_rate = 0.0;

  std::string name() const;
  // Radius of the circumscribed circle; used for the non-overlap invariant.
  double circumradius() const;
  bool operator==(const SceneObject&) const = default;
};

// Vertical lane band [x0, x1) spanning the canvas height.
struct Lane {
  double x0 = 0.0;
  double x1 = 0.0;
  bool operator==(const Lane&) const = default;
};

struct EgoState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double radius = 2.0;
  bool operator==(const EgoState&) const = default;
};

struct Scene {
  int extent = 32;
  std::vector<SceneObject> objects;
  std::vector<Lane> lanes;
  std::optional<EgoState> ego;

  bool is_driving() const { return ego.has_value(); }
  // Objects inside the canvas, interiors disjoint, at most one ego.
  bool valid() const;
  bool operator==(const Scene&) const = default;
};

// Binary raster aligned with the canvas grid.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<size_t>(w) * h, 0) {}

  bool at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) { bits[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
  size_t count() const;
  bool empty() const { return count() == 0; }

  // "WxH:" followed by comma-separated run lengths over the row-major
  // raster, starting with a run of zeros (possibly 0).
  std::string to_rle() const;
  static Mask from_rle(std::string_view rle);

  bool operator==(const Mask&) const = default;
};

// Normalized axis-aligned box in [0, 1]^2.
struct Box {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
  bool operator==(const Box&) const = default;
};

// Pixel (x, y) belongs to an object iff its center (x + 0.5, y + 0.5) lies
// inside the closed analytic primitive.
bool contains(const SceneObject& object, double px, double py);
Mask rasterize(const SceneObject& object, int extent);
Box bounding_box(const SceneObject& object, int extent);

// Union of every object footprint (and the ego, if present).
Mask occupancy(const Scene& scene);

// Agent poses after `t` seconds of constant speed and heading rate.
SceneObject advance(const SceneObject& agent, double t);
Scene advance(const Scene& scene, double t);

// Deterministic flat-shaded rendering: background, lane bands, objects, ego.
Image render_scene(const Scene& scene);

void to_json(nlohmann::json& j, const SceneObject& o);
void from_json(const nlohmann::json& j, SceneObject& o);
void to_json(nlohmann::json& j, const Scene& s);
void from_json(const nlohmann::json& j, Scene& s);

}  // namespace xvlm::corpus
