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

#include "xvlm/synthcorpus/scene.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

namespace xvlm::corpus {

namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

constexpr Rgb kBackground{24, 24, 32};
constexpr Rgb kLaneA{72, 72, 80};
constexpr Rgb kLaneB{96, 96, 104};
constexpr Rgb kEgo{255, 255, 255};

Rgb palette(Color c) {
  switch (c) {
    case Color::kRed: return {230, 40, 40};
    case Color::kGreen: return {40, 200, 60};
    case Color::kBlue: return {50, 90, 240};
    case Color::kYellow: return {240, 220, 40};
    case Color::kPurple: return {170, 60, 210};
  }
  return {0, 0, 0};
}

void paint(Image& img, int x, int y, Rgb c) {
  img.at(y, x, 0) = c.r / 255.0;
  img.at(y, x, 1) = c.g / 255.0;
  img.at(y, x, 2) = c.b / 255.0;
}

SceneObject ego_object(const EgoState& e) {
  SceneObject o;
  o.shape = Shape::kSquare;
  o.cx = e.x;
  o.cy = e.y;
  o.radius = e.radius;
  return o;
}

}  // namespace

std::string_view shape_name(Shape s) {
  switch (s) {
    case Shape::kCircle: return "circle";
    case Shape::kSquare: return "square";
    case Shape::kTriangle: return "triangle";
  }
  return "?";
}

std::string_view shape_plural(Shape s) {
  switch (s) {
    case Shape::kCircle: return "circles";
    case Shape::kSquare: return "squares";
    case Shape::kTriangle: return "triangles";
  }
  return "?";
}

std::string_view color_name(Color c) {
  switch (c) {
    case Color::kRed: return "red";
    case Color::kGreen: return "green";
    case Color::kBlue: return "blue";
    case Color::kYellow: return "yellow";
    case Color::kPurple: return "purple";
  }
  return "?";
}

Shape parse_shape(std::string_view s) {
  for (Shape v : kAllShapes) {
    if (shape_name(v) == s) return v;
  }
  throw ArgumentError("unknown shape: " + std::string(s));
}

Color parse_color(std::string_view s) {
  for (Color v : kAllColors) {
    if (color_name(v) == s) return v;
  }
  throw ArgumentError("unknown color: " + std::string(s));
}

std::string SceneObject::name() const {
  return std::string(color_name(color)) + " " + std::string(shape_name(shape));
}

double SceneObject::circumradius() const {
  return shape == Shape::kCircle ? radius : radius * std::sqrt(2.0);
}

bool Scene::valid() const {
  const double e = extent;
  std::vector<SceneObject> all = objects;
  if (ego) all.push_back(ego_object(*ego));
  for (const auto& o : all) {
    if (o.radius <= 0.0) return false;
    if (o.cx - o.radius < 0.0 || o.cx + o.radius > e) return false;
    if (o.cy - o.radius < 0.0 || o.cy + o.radius > e) return false;
  }
  for (size_t i = 0; i < all.size(); ++i) {
    for (size_t j = i + 1; j < all.size(); ++j) {
      const double d = std::hypot(all[i].cx - all[j].cx, all[i].cy - all[j].cy);
      if (d < all[i].circumradius() + all[j].circumradius()) return false;
    }
  }
  return true;
}

size_t Mask::count() const {
  return static_cast<size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::string Mask::to_rle() const {
  std::string out = std::to_string(width) + "x" + std::to_string(height) + ":";
  std::uint8_t current = 0;
  size_t run = 0;
  bool first = true;
  auto flush = [&] {
    if (!first) out += ',';
    out += std::to_string(run);
    first = false;
  };
  for (std::uint8_t b : bits) {
    if (b != current) {
      flush();
      current = b;
      run = 0;
    }
    ++run;
  }
  flush();
  return out;
}

Mask Mask::from_rle(std::string_view rle) {
  auto fail = [&] { throw ArgumentError("malformed mask encoding"); };
  const size_t xpos = rle.find('x');
  const size_t colon = rle.find(':');
  if (xpos == std::string_view::npos || colon == std::string_view::npos || xpos > colon) fail();
  auto parse = [&](std::string_view s) {
    size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) fail();
    return v;
  };
  const size_t w = parse(rle.substr(0, xpos));
  const size_t h = parse(rle.substr(xpos + 1, colon - xpos - 1));
  Mask m(static_cast<int>(w), static_cast<int>(h));
  std::string_view rest = rle.substr(colon + 1);
  size_t pos = 0;
  std::uint8_t value = 0;
  while (!rest.empty()) {
    const size_t comma = rest.find(',');
    const size_t run = parse(rest.substr(0, comma));
    if (pos + run > m.bits.size()) fail();
    std::fill_n(m.bits.begin() + pos, run, value);
    pos += run;
    value ^= 1;
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (pos != m.bits.size()) fail();
  return m;
}

bool contains(const SceneObject& o, double px, double py) {
  const double dx = px - o.cx;
  const double dy = py - o.cy;
  const double r = o.radius;
  switch (o.shape) {
    case Shape::kCircle:
      return dx * dx + dy * dy <= r * r;
    case Shape::kSquare:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case Shape::kTriangle: {
      // Apex (cx, cy - r), base from (cx - r, cy + r) to (cx + r, cy + r).
      if (dy < -r || dy > r) return false;
      const double half_width = (dy + r) / 2.0;
      return std::abs(dx) <= half_width;
    }
  }
  return false;
}

Mask rasterize(const SceneObject& o, int extent) {
  Mask m(extent, extent);
  const int y0 = std::max(0, static_cast<int>(std::floor(o.cy - o.radius)) - 1);
  const int y1 = std::min(extent - 1, static_cast<int>(std::ceil(o.cy + o.radius)) + 1);
  const int x0 = std::max(0, static_cast<int>(std::floor(o.cx - o.radius)) - 1);
  const int x1 = std::min(extent - 1, static_cast<int>(std::ceil(o.cx + o.radius)) + 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (contains(o, x + 0.5, y + 0.5)) m.set(x, y);
    }
  }
  return m;
}

Box bounding_box(const SceneObject& o, int extent) {
  const double e = extent;
  return Box{(o.cx - o.radius) / e, (o.cy - o.radius) / e, (o.cx + o.radius) / e,
             (o.cy + o.radius) / e};
}

Mask occupancy(const Scene& scene) {
  Mask m(scene.extent, scene.extent);
  auto merge = [&](const SceneObject& o) {
    const Mask r = rasterize(o, scene.extent);
    for (size_t i = 0; i < m.bits.size(); ++i) m.bits[i] |= r.bits[i];
  };
  for (const auto& o : scene.objects) merge(o);
  if (scene.ego) merge(ego_object(*scene.ego));
  return m;
}

SceneObject advance(const SceneObject& a, double t) {
  SceneObject out = a;
  if (a.kind != ObjectKind::kAgent) return out;
  const double dtheta = a.heading_rate * t;
  if (a.heading_rate == 0.0) {
    out.cx += a.speed * t * std::cos(a.heading);
    out.cy += a.speed * t * std::sin(a.heading);
  } else {
    const double rho = a.speed / a.heading_rate;
    out.cx += rho * (std::sin(a.heading + dtheta) - std::sin(a.heading));
    out.cy += rho * (std::cos(a.heading) - std::cos(a.heading + dtheta));
  }
  out.heading = a.heading + dtheta;
  return out;
}

Scene advance(const Scene& scene, double t) {
  Scene out = scene;
  for (auto& o : out.objects) o = advance(o, t);
  return out;
}

Image render_scene(const Scene& scene) {
  const int n = scene.extent;
  Image img;
  img.height = n;
  img.width = n;
  img.pixels.assign(static_cast<size_t>(n) * n * 3, 0.0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) paint(img, x, y, kBackground);
  }
  for (size_t i = 0; i < scene.lanes.size(); ++i) {
    const Rgb shade = i % 2 == 0 ? kLaneA : kLaneB;
    for (int x = 0; x < n; ++x) {
      const double c = x + 0.5;
      if (c < scene.lanes[i].x0 || c >= scene.lanes[i].x1) continue;
      for (int y = 0; y < n; ++y) paint(img, x, y, shade);
    }
  }
  auto draw = [&](const SceneObject& o, Rgb c) {
    const Mask m = rasterize(o, n);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (m.at(x, y)) paint(img, x, y, c);
      }
    }
  };
  for (const auto& o : scene.objects) draw(o, palette(o.color));
  if (scene.ego) draw(ego_object(*scene.ego), kEgo);
  return img;
}

void to_json(nlohmann::json& j, const SceneObject& o) {
  j = {{"shape", shape_name(o.shape)},
       {"color", color_name(o.color)},
       {"cx", o.cx},
       {"cy", o.cy},
       {"radius", o.radius},
       {"kind", o.kind == ObjectKind::kAgent ? "agent" : "static"}};
  if (o.kind == ObjectKind::kAgent) {
    j["heading"] = o.heading;
    j["speed"] = o.speed;
    j["heading_rate"] = o.heading_rate;
  }
}

void from_json(const nlohmann::json& j, SceneObject& o) {
  o.shape = parse_shape(j.at("shape").get<std::string>());
  o.color = parse_color(j.at("color").get<std::string>());
  o.cx = j.at("cx").get<double>();
  o.cy = j.at("cy").get<double>();
  o.radius = j.at("radius").get<double>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != "agent" && kind != "static") throw ArgumentError("unknown object kind: " + kind);
  o.kind = kind == "agent" ? ObjectKind::kAgent : ObjectKind::kStatic;
  o.heading = j.value("heading", 0.0);
  o.speed = j.value("speed", 0.0);
  o.heading_rate = j.value("heading_rate", 0.0);
}

void to_json(nlohmann::json& j, const Scene& s) {
  j = {{"extent", s.extent}, {"objects", s.objects}};
  if (!s.lanes.empty()) {
    auto lanes = nlohmann::json::array();
    for (const auto& l : s.lanes) lanes.push_back({l.x0, l.x1});
    j["lanes"] = lanes;
  }
  if (s.ego) {
    j["ego"] = {{"x", s.ego->x},
                {"y", s.ego->y},
                {"heading", s.ego->heading},
                {"speed", s.ego->speed},
                {"radius", s.ego->radius}};
  }
}

void from_json(const nlohmann::json& j, Scene& s) {
  s.extent = j.at("extent").get<int>();
  s.objects = j.at("objects").get<std::vector<SceneObject>>();
  s.lanes.clear();
  if (j.contains("lanes")) {
    for (const auto& l : j.at("lanes")) s.lanes.push_back({l.at(0).get<double>(), l.at(1).get<double>()});
  }
  s.ego.reset();
  if (j.contains("ego")) {
    const auto& e = j.at("ego");
    s.ego = EgoState{e.at("x").get<double>(), e.at("y").get<double>(), e.at("heading").get<double>(),
                     e.at("speed").get<double>(), e.at("radius").get<double>()};
  }
}

}  // namespace xvlm::corpus
