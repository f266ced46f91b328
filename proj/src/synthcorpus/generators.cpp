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

#include "xvlm/synthcorpus/generators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>

#include "xvlm/rng.hpp"

namespace xvlm::corpus {

namespace {

using nlohmann::json;

constexpr double kUp = -std::numbers::pi / 2.0;
constexpr double kGap = 1.0;  // clearance between circumscribed circles

std::string sample_id(std::string_view corpus, std::uint64_t seed, int index) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.*s-%llu-%05d", static_cast<int>(corpus.size()), corpus.data(),
                static_cast<unsigned long long>(seed), index);
  return buf;
}

bool clear_of(const SceneObject& o, const Scene& scene) {
  for (const auto& other : scene.objects) {
    const double d = std::hypot(o.cx - other.cx, o.cy - other.cy);
    if (d < o.circumradius() + other.circumradius() + kGap) return false;
  }
  if (scene.ego) {
    const double d = std::hypot(o.cx - scene.ego->x, o.cy - scene.ego->y);
    if (d < o.circumradius() + scene.ego->radius * std::sqrt(2.0) + kGap) return false;
  }
  return true;
}

std::vector<Color> shuffled_colors(Rng& rng) {
  std::vector<Color> c(std::begin(kAllColors), std::end(kAllColors));
  rng.shuffle(c);
  return c;
}

Shape random_shape(Rng& rng) { return kAllShapes[rng.below(3)]; }

// `count` static objects with distinct colors, or nothing if packing fails.
std::optional<Scene> static_scene(Rng& rng, int extent, int count) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Scene s;
    s.extent = extent;
    const auto colors = shuffled_colors(rng);
    bool ok = true;
    for (int i = 0; i < count && ok; ++i) {
      ok = false;
      for (int t = 0; t < 200; ++t) {
        SceneObject o;
        o.shape = random_shape(rng);
        o.color = colors[i];
        o.radius = rng.uniform(2.5, 3.5);
        o.cx = rng.uniform(o.radius, extent - o.radius);
        o.cy = rng.uniform(o.radius, extent - o.radius);
        if (clear_of(o, s)) {
          s.objects.push_back(o);
          ok = true;
          break;
        }
      }
    }
    if (ok) return s;
  }
  return std::nullopt;
}

Scene must_static_scene(Rng& rng, int extent, int count) {
  for (;;) {
    if (auto s = static_scene(rng, extent, count)) return *s;
  }
}

Scene drive_scene(int extent, double ego_speed) {
  Scene s;
  s.extent = extent;
  s.lanes = drive_lanes();
  s.ego = EgoState{DriveLayout::kEgoX, DriveLayout::kEgoY, kUp, ego_speed, DriveLayout::kEgoRadius};
  return s;
}

double lane_center(int lane) { return DriveLayout::kRoadLeft + (lane + 0.5) * DriveLayout::kLaneWidth; }

// Places one agent in `lane` with center y drawn from [ylo, yhi].
bool add_agent(Rng& rng, Scene& s, Color color, int lane, double ylo, double yhi, double speed,
               double heading_rate = 0.0) {
  for (int t = 0; t < 100; ++t) {
    SceneObject o;
    o.kind = ObjectKind::kAgent;
    o.shape = random_shape(rng);
    o.color = color;
    o.radius = rng.uniform(2.0, 2.5);
    o.cx = lane_center(lane) + rng.uniform(-1.0, 1.0);
    o.cy = rng.uniform(std::max(ylo, o.radius), std::min(yhi, s.extent - o.radius));
    o.heading = kUp;
    o.speed = speed;
    o.heading_rate = heading_rate;
    if (clear_of(o, s)) {
      s.objects.push_back(o);
      return true;
    }
  }
  return false;
}

ChoiceTruth make_choice(Rng& rng, const std::string& correct, std::vector<std::string> distractors) {
  std::vector<std::string> options{correct};
  for (auto& d : distractors) options.push_back(std::move(d));
  rng.shuffle(options);
  ChoiceTruth c;
  c.options = options;
  c.letter = static_cast<char>('A' + (std::find(options.begin(), options.end(), correct) - options.begin()));
  return c;
}

std::vector<std::string> other_colors(Rng& rng, Color gold, int k) {
  std::vector<std::string> out;
  for (Color c : shuffled_colors(rng)) {
    if (c != gold && static_cast<int>(out.size()) < k) out.emplace_back(color_name(c));
  }
  return out;
}

std::vector<std::string> number_distractors(Rng& rng, int gold, int lo, int hi, int k) {
  std::vector<std::string> pool;
  for (int v = lo; v <= hi; ++v) {
    if (v != gold) pool.push_back(std::to_string(v));
  }
  rng.shuffle(pool);
  pool.resize(k);
  return pool;
}

struct Draft {
  std::string subtask;
  Scene scene;
  std::string prompt;
  GroundTruth truth;
  json question = json::object();
  std::vector<Image> images;
};

Sample finish(std::string_view corpus, Domain domain, std::uint64_t seed, int index, Draft d) {
  Sample s;
  s.id = sample_id(corpus, seed, index);
  s.corpus = std::string(corpus);
  s.domain = domain;
  s.task_kind = task_kind_of(d.truth);
  s.subtask = std::move(d.subtask);
  s.prompt = std::move(d.prompt);
  s.truth = std::move(d.truth);
  s.question = std::move(d.question);
  s.images = d.images.empty() ? std::vector<Image>{render_scene(d.scene)} : std::move(d.images);
  s.scene = std::move(d.scene);
  return s;
}

std::vector<Sample> run(std::string_view corpus, Domain domain, std::uint64_t seed, int n,
                        const std::function<Draft(Rng&)>& make) {
  if (n <= 0) throw ArgumentError("sample count must be positive");
  std::vector<Sample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(finish(corpus, domain, seed, i, make(rng)));
  }
  return out;
}

// Offset of `c` along a relation axis relative to `ref`; positive means the
// relation holds.
double relation_offset(std::string_view rel, const SceneObject& c, const SceneObject& ref) {
  if (rel == "left_of") return ref.cx - c.cx;
  if (rel == "right_of") return c.cx - ref.cx;
  if (rel == "above") return ref.cy - c.cy;
  return c.cy - ref.cy;
}

std::string relation_text(std::string_view rel) {
  if (rel == "left_of") return "left of";
  if (rel == "right_of") return "right of";
  return std::string(rel);
}

const std::vector<std::string> kRelations{"left_of", "right_of", "above", "below"};

Mask free_region(const Scene& scene, const SceneObject& ref, std::string_view rel) {
  const Mask occ = occupancy(scene);
  Mask m(scene.extent, scene.extent);
  for (int y = 0; y < scene.extent; ++y) {
    for (int x = 0; x < scene.extent; ++x) {
      if (occ.at(x, y)) continue;
      const double px = x + 0.5, py = y + 0.5;
      bool in = false;
      if (rel == "left_of") in = px < ref.cx - ref.radius && std::abs(py - ref.cy) <= ref.radius;
      if (rel == "right_of") in = px > ref.cx + ref.radius && std::abs(py - ref.cy) <= ref.radius;
      if (rel == "above") in = py < ref.cy - ref.radius && std::abs(px - ref.cx) <= ref.radius;
      if (rel == "below") in = py > ref.cy + ref.radius && std::abs(px - ref.cx) <= ref.radius;
      if (in) m.set(x, y);
    }
  }
  return m;
}

// ---- general ----

Draft general_draft(Rng& rng, int extent) {
  const int kind = static_cast<int>(rng.below(4));
  Scene scene = must_static_scene(rng, extent, rng.range(1, 3));
  const int target = static_cast<int>(rng.below(scene.objects.size()));
  const SceneObject o = scene.objects[target];
  Draft d;
  d.question = {{"target", target}};
  if (kind == 0) {
    d.subtask = "shape_name";
    std::vector<std::string> others;
    for (Shape s : kAllShapes) {
      if (s != o.shape) others.emplace_back(shape_name(s));
    }
    auto choice = make_choice(rng, std::string(shape_name(o.shape)), others);
    d.prompt = mcq_prompt("What shape is the " + std::string(color_name(o.color)) + " object?", choice.options);
    d.truth = choice;
  } else if (kind == 1) {
    // Ask by shape; every object sharing the shape is recolored away.
    d.subtask = "color_name";
    scene.objects.erase(std::remove_if(scene.objects.begin(), scene.objects.end(),
                                       [&](const SceneObject& x) { return x.shape == o.shape && !(x == o); }),
                        scene.objects.end());
    d.question = {{"target", std::find(scene.objects.begin(), scene.objects.end(), o) - scene.objects.begin()}};
    auto choice = make_choice(rng, std::string(color_name(o.color)), other_colors(rng, o.color, 3));
    d.prompt = mcq_prompt("What color is the " + std::string(shape_name(o.shape)) + "?", choice.options);
    d.truth = choice;
  } else if (kind == 2) {
    d.subtask = "ground";
    d.prompt = "Locate the " + o.name() + ".";
    d.truth = BoxTruth{bounding_box(o, extent)};
  } else {
    d.subtask = "name_shape";
    d.prompt = "Name the shape of the " + std::string(color_name(o.color)) + " object.";
    d.truth = TextTruth{std::string(shape_name(o.shape))};
  }
  d.scene = std::move(scene);
  return d;
}

// ---- embodied ----

Draft affordance_draft(Rng& rng, int extent) {
  const double u = rng.unit();
  Draft d;
  if (u < 0.4) {
    Scene scene = must_static_scene(rng, extent, rng.range(2, 4));
    const int target = static_cast<int>(rng.below(scene.objects.size()));
    const SceneObject& o = scene.objects[target];
    d.subtask = "point_object";
    d.prompt = "Point to the " + o.name() + ".";
    d.truth = PointTruth{rasterize(o, extent)};
    d.question = {{"target", target}};
    d.scene = std::move(scene);
  } else if (u < 0.8) {
    const std::string rel = rng.pick(kRelations);
    for (;;) {
      Scene scene = must_static_scene(rng, extent, rng.range(2, 4));
      const int ref = static_cast<int>(rng.below(scene.objects.size()));
      Mask m = free_region(scene, scene.objects[ref], rel);
      if (m.count() < 4) continue;
      d.subtask = "point_free";
      d.prompt = "Point to free space " + relation_text(rel) + " the " + scene.objects[ref].name() + ".";
      d.truth = PointTruth{std::move(m)};
      d.question = {{"reference", ref}, {"relation", rel}};
      d.scene = std::move(scene);
      break;
    }
  } else {
    Scene scene = must_static_scene(rng, extent, rng.range(2, 4));
    const int target = static_cast<int>(rng.below(scene.objects.size()));
    const SceneObject& o = scene.objects[target];
    d.subtask = "ground_object";
    d.prompt = "Locate the " + o.name() + ".";
    d.truth = BoxTruth{bounding_box(o, extent)};
    d.question = {{"target", target}};
    d.scene = std::move(scene);
  }
  return d;
}

Draft spatial_draft(Rng& rng, int extent) {
  static const std::vector<std::string> kKinds{"left_of", "right_of", "above", "below", "closest_to_edge", "count"};
  const std::string kind = rng.pick(kKinds);
  Draft d;
  d.subtask = kind;
  if (kind == "count") {
    Scene scene = must_static_scene(rng, extent, rng.range(2, 5));
    const Shape shape = random_shape(rng);
    const int k = static_cast<int>(std::count_if(scene.objects.begin(), scene.objects.end(),
                                                 [&](const SceneObject& o) { return o.shape == shape; }));
    auto choice = make_choice(rng, std::to_string(k), number_distractors(rng, k, 0, 5, 3));
    d.prompt = mcq_prompt("How many " + std::string(shape_plural(shape)) + " are there?", choice.options);
    d.truth = choice;
    d.question = {{"shape", shape_name(shape)}};
    d.scene = std::move(scene);
    return d;
  }
  if (kind == "closest_to_edge") {
    for (;;) {
      Scene scene = must_static_scene(rng, extent, 4);
      std::vector<std::pair<double, int>> dist;
      for (int i = 0; i < 4; ++i) {
        const auto& o = scene.objects[i];
        dist.push_back({std::min({o.cx, o.cy, extent - o.cx, extent - o.cy}), i});
      }
      std::sort(dist.begin(), dist.end());
      if (dist[1].first - dist[0].first < 1.0) continue;
      std::vector<std::string> others;
      for (int i = 1; i < 4; ++i) others.push_back(scene.objects[dist[i].second].name());
      auto choice = make_choice(rng, scene.objects[dist[0].second].name(), others);
      d.prompt = mcq_prompt("Which object is closest to the image edge?", choice.options);
      d.truth = choice;
      d.scene = std::move(scene);
      return d;
    }
  }
  for (;;) {
    Scene scene = must_static_scene(rng, extent, 5);
    const int ref = static_cast<int>(rng.below(5));
    int hit = -1, hits = 0;
    bool clean = true;
    for (int i = 0; i < 5; ++i) {
      if (i == ref) continue;
      const double off = relation_offset(kind, scene.objects[i], scene.objects[ref]);
      if (off > 1.0) {
        hit = i;
        ++hits;
      } else if (off > -1.0) {
        clean = false;
      }
    }
    if (!clean || hits != 1) continue;
    std::vector<std::string> others;
    for (int i = 0; i < 5; ++i) {
      if (i != ref && i != hit) others.push_back(scene.objects[i].name());
    }
    auto choice = make_choice(rng, scene.objects[hit].name(), others);
    d.prompt = mcq_prompt("Which object is " + relation_text(kind) + " the " + scene.objects[ref].name() + "?",
                          choice.options);
    d.truth = choice;
    d.question = {{"reference", ref}, {"relation", kind}};
    d.scene = std::move(scene);
    return d;
  }
}

Draft planning_draft(Rng& rng, int extent) {
  Scene scene = must_static_scene(rng, extent, 4);
  const auto& o = scene.objects;
  const std::vector<std::string> script{"pick " + o[0].name(), "place on " + o[1].name(), "pick " + o[2].name(),
                                        "place on " + o[3].name()};
  const int history = rng.range(0, 3);
  std::string done;
  for (int i = 0; i < history; ++i) done += (i ? ", " : "") + script[i];
  if (done.empty()) done = "nothing";
  std::vector<std::string> others;
  for (int i = 0; i < 4; ++i) {
    if (i != history) others.push_back(script[i]);
  }
  Draft d;
  d.subtask = "next_step";
  auto choice = make_choice(rng, script[history], others);
  d.prompt = mcq_prompt("Goal: put the " + o[0].name() + " on the " + o[1].name() + ", then the " + o[2].name() +
                            " on the " + o[3].name() + ". Done: " + done + ". Next step?",
                        choice.options);
  d.truth = choice;
  d.question = {{"script", script}, {"history", history}};
  d.scene = std::move(scene);
  return d;
}

// ---- driving ----

Draft perception_draft(Rng& rng, int extent) {
  static const std::vector<std::string> kKinds{"count", "color", "nearest"};
  const std::string kind = rng.pick(kKinds);
  Draft d;
  d.subtask = kind;
  for (;;) {
    Scene scene = drive_scene(extent, rng.uniform(3.0, 5.0));
    const int agents = kind == "nearest" ? 4 : rng.range(1, 4);
    const auto colors = shuffled_colors(rng);
    bool ok = true;
    for (int i = 0; i < agents && ok; ++i) {
      ok = add_agent(rng, scene, colors[i], static_cast<int>(rng.below(3)), 0.0, 22.0, rng.uniform(0.0, 2.0));
    }
    if (!ok) continue;
    if (kind == "count") {
      auto choice = make_choice(rng, std::to_string(agents), number_distractors(rng, agents, 0, 5, 3));
      d.prompt = mcq_prompt("How many agents are there?", choice.options);
      d.truth = choice;
    } else if (kind == "color") {
      const int target = static_cast<int>(rng.below(agents));
      const SceneObject& t = scene.objects[target];
      if (std::count_if(scene.objects.begin(), scene.objects.end(),
                        [&](const SceneObject& o) { return o.shape == t.shape; }) != 1) {
        continue;
      }
      auto choice = make_choice(rng, std::string(color_name(t.color)), other_colors(rng, t.color, 3));
      d.prompt = mcq_prompt("What color is the " + std::string(shape_name(t.shape)) + " agent?", choice.options);
      d.truth = choice;
      d.question = {{"target", target}};
    } else {
      std::vector<std::pair<double, int>> dist;
      for (int i = 0; i < agents; ++i) {
        const auto& o = scene.objects[i];
        dist.push_back({std::hypot(o.cx - scene.ego->x, o.cy - scene.ego->y), i});
      }
      std::sort(dist.begin(), dist.end());
      if (dist[1].first - dist[0].first < 1.0) continue;
      std::vector<std::string> others;
      for (int i = 1; i < agents; ++i) others.push_back(scene.objects[dist[i].second].name());
      auto choice = make_choice(rng, scene.objects[dist[0].second].name(), others);
      d.prompt = mcq_prompt("Which agent is nearest to the ego car?", choice.options);
      d.truth = choice;
    }
    d.scene = std::move(scene);
    return d;
  }
}

Draft prediction_draft(Rng& rng, int extent) {
  static const std::vector<std::string> kIntents{"go straight", "turn left", "turn right"};
  const std::string intent = rng.pick(kIntents);
  for (;;) {
    Scene scene = drive_scene(extent, rng.uniform(3.0, 5.0));
    const auto colors = shuffled_colors(rng);
    double rate = 0.0;
    if (intent == "turn left") rate = -rng.uniform(0.8, 1.5);
    if (intent == "turn right") rate = rng.uniform(0.8, 1.5);
    if (!add_agent(rng, scene, colors[0], static_cast<int>(rng.below(3)), 10.0, 20.0, rng.uniform(3.0, 5.0), rate)) {
      continue;
    }
    const int extra = rng.range(0, 2);
    bool ok = true;
    for (int i = 0; i < extra && ok; ++i) {
      ok = add_agent(rng, scene, colors[i + 1], static_cast<int>(rng.below(3)), 6.0, 22.0, rng.uniform(0.0, 3.0));
    }
    if (!ok) continue;
    const Scene later = advance(scene, DriveLayout::kPredictionGap);
    if (!later.valid()) continue;
    const SceneObject& agent = scene.objects[0];
    Draft d;
    d.subtask = "intent";
    const std::string gold = agent_intent(agent);
    std::vector<std::string> others;
    for (std::string a : {"go straight", "turn left", "turn right", "reverse"}) {
      if (a != gold) others.push_back(a);
    }
    auto choice = make_choice(rng, gold, others);
    d.prompt = mcq_prompt("Two frames, one second apart. What will the " + agent.name() + " do?", choice.options);
    d.truth = choice;
    d.question = {{"target", 0}};
    d.images = {render_scene(scene), render_scene(later)};
    d.scene = std::move(scene);
    return d;
  }
}

std::string route_phrase(const std::string& route) {
  return route == "straight" ? "go straight" : "turn " + route;
}

Draft planning_drive_draft(Rng& rng, int extent) {
  static const std::vector<std::string> kRoutes{"straight", "left", "right"};
  const std::string route = rng.pick(kRoutes);
  const int ego_lane = lane_of(DriveLayout::kEgoX);
  if (rng.unit() < 0.6) {
    const bool blocked = rng.bernoulli(0.5);
    for (;;) {
      Scene scene = drive_scene(extent, rng.uniform(3.0, 5.0));
      const auto colors = shuffled_colors(rng);
      bool ok = true;
      int next_color = 0;
      const double ey = DriveLayout::kEgoY;
      if (blocked) {
        ok = add_agent(rng, scene, colors[next_color++], ego_lane, ey - DriveLayout::kStopDistance + 1.0, ey - 6.0,
                       rng.uniform(0.0, 1.0));
      } else if (rng.bernoulli(0.5)) {
        ok = add_agent(rng, scene, colors[next_color++], ego_lane, 0.0, ey - DriveLayout::kStopDistance - 2.0,
                       rng.uniform(0.0, 2.0));
      }
      const int side = rng.range(0, 2);
      for (int i = 0; i < side && ok; ++i) {
        const int lane = rng.bernoulli(0.5) ? 0 : 2;
        ok = add_agent(rng, scene, colors[next_color++], lane, 0.0, 29.0, rng.uniform(0.0, 2.0));
      }
      if (!ok) continue;
      Draft d;
      d.subtask = "meta_action";
      std::string gold = blocked ? "stop" : route == "straight" ? "keep lane" : "turn " + route;
      std::vector<std::string> others;
      for (std::string a : {"stop", "keep lane", "turn left", "turn right"}) {
        if (a != gold) others.push_back(a);
      }
      auto choice = make_choice(rng, gold, others);
      d.prompt = mcq_prompt("Route: " + route_phrase(route) + ". What should the ego car do next?", choice.options);
      d.truth = choice;
      d.question = {{"route", route}};
      d.scene = std::move(scene);
      return d;
    }
  }
  const int speed = rng.range(3, 5);
  const double curvature =
      route == "left" ? -DriveLayout::kCurvature : route == "right" ? DriveLayout::kCurvature : 0.0;
  for (;;) {
    Scene scene = drive_scene(extent, speed);
    const auto path = arc_waypoints(*scene.ego, curvature, DriveLayout::kHorizon, DriveLayout::kWaypointDt);
    const auto colors = shuffled_colors(rng);
    const int agents = rng.range(0, 3);
    bool ok = true;
    for (int i = 0; i < agents && ok; ++i) {
      ok = add_agent(rng, scene, colors[i], static_cast<int>(rng.below(3)), 0.0, 22.0, rng.uniform(0.0, 3.0));
    }
    if (!ok) continue;
    // Keep agents well clear of the gold path at every time step.
    const auto fine = arc_waypoints(*scene.ego, curvature, DriveLayout::kHorizon, 0.1);
    for (const auto& a : scene.objects) {
      for (size_t k = 0; k < fine.size() && ok; ++k) {
        const SceneObject at = advance(a, 0.1 * (k + 1));
        ok = std::hypot(at.cx - fine[k].x, at.cy - fine[k].y) >=
             a.circumradius() + DriveLayout::kEgoRadius * std::sqrt(2.0) + 3.0;
      }
    }
    if (!ok || plan_collides(scene, path, DriveLayout::kWaypointDt) ||
        plan_min_ttc(scene, path, DriveLayout::kWaypointDt) < DriveLayout::kMinTtc) {
      continue;
    }
    Draft d;
    d.subtask = "trajectory";
    d.prompt = "Route: " + route_phrase(route) + ". Speed " + std::to_string(speed) +
               ". Plan the ego path for the next 3 seconds.";
    d.truth = TrajectoryTruth{DriveLayout::kWaypointDt, path};
    d.question = {{"route", route}, {"speed", speed}, {"curvature", curvature}};
    d.scene = std::move(scene);
    return d;
  }
}

}  // namespace

std::vector<Lane> drive_lanes() {
  std::vector<Lane> lanes;
  for (int i = 0; i < DriveLayout::kLanes; ++i) {
    const double x0 = DriveLayout::kRoadLeft + i * DriveLayout::kLaneWidth;
    lanes.push_back({x0, x0 + DriveLayout::kLaneWidth});
  }
  return lanes;
}

int lane_of(double x) {
  const double rel = (x - DriveLayout::kRoadLeft) / DriveLayout::kLaneWidth;
  if (rel < 0.0 || rel >= DriveLayout::kLanes) return -1;
  return static_cast<int>(rel);
}

std::vector<Point2> arc_waypoints(const EgoState& ego, double curvature, double horizon, double dt) {
  std::vector<Point2> out;
  double x = ego.x, y = ego.y, theta = ego.heading;
  const int steps = static_cast<int>(std::lround(horizon / dt));
  const double ds = ego.speed * dt;
  for (int k = 0; k < steps; ++k) {
    const double dtheta = curvature * ds;
    const double chord = curvature == 0.0 ? ds : 2.0 * std::sin(dtheta / 2.0) / curvature;
    x += chord * std::cos(theta + dtheta / 2.0);
    y += chord * std::sin(theta + dtheta / 2.0);
    theta += dtheta;
    out.push_back({x, y});
  }
  return out;
}

EgoKinematics ego_kinematics(const EgoState& ego, const std::vector<Point2>& waypoints, double dt) {
  EgoKinematics k;
  k.position.push_back({ego.x, ego.y});
  k.velocity.push_back({ego.speed * std::cos(ego.heading), ego.speed * std::sin(ego.heading)});
  for (const auto& p : waypoints) {
    const Point2& prev = k.position.back();
    k.velocity.push_back({(p.x - prev.x) / dt, (p.y - prev.y) / dt});
    k.position.push_back(p);
  }
  for (size_t i = 1; i < k.velocity.size(); ++i) {
    k.acceleration.push_back({(k.velocity[i].x - k.velocity[i - 1].x) / dt,
                              (k.velocity[i].y - k.velocity[i - 1].y) / dt});
  }
  for (size_t i = 1; i < k.acceleration.size(); ++i) {
    k.jerk.push_back({(k.acceleration[i].x - k.acceleration[i - 1].x) / dt,
                      (k.acceleration[i].y - k.acceleration[i - 1].y) / dt});
  }
  return k;
}

namespace {

double segment_distance(const Point2& a, const Point2& b, const Point2& p) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

}  // namespace

bool plan_collides(const Scene& scene, const std::vector<Point2>& waypoints, double dt) {
  if (!scene.ego) throw ArgumentError("plan_collides: scene has no ego");
  Point2 prev{scene.ego->x, scene.ego->y};
  for (size_t k = 0; k < waypoints.size(); ++k) {
    for (const auto& o : scene.objects) {
      if (o.kind != ObjectKind::kAgent) continue;
      const SceneObject at = advance(o, dt * static_cast<double>(k + 1));
      if (segment_distance(prev, waypoints[k], {at.cx, at.cy}) <= scene.ego->radius + at.circumradius()) {
        return true;
      }
    }
    prev = waypoints[k];
  }
  return false;
}

double plan_min_ttc(const Scene& scene, const std::vector<Point2>& waypoints, double dt) {
  if (!scene.ego) throw ArgumentError("plan_min_ttc: scene has no ego");
  const auto kin = ego_kinematics(*scene.ego, waypoints, dt);
  double best = std::numeric_limits<double>::infinity();
  for (size_t k = 1; k < kin.position.size(); ++k) {
    for (const auto& o : scene.objects) {
      if (o.kind != ObjectKind::kAgent) continue;
      const SceneObject at = advance(o, dt * static_cast<double>(k));
      const double dx = at.cx - kin.position[k].x, dy = at.cy - kin.position[k].y;
      const double wx = at.speed * std::cos(at.heading) - kin.velocity[k].x;
      const double wy = at.speed * std::sin(at.heading) - kin.velocity[k].y;
      const double r = scene.ego->radius + at.circumradius();
      const double c = dx * dx + dy * dy - r * r;
      if (c <= 0.0) return 0.0;
      const double a = wx * wx + wy * wy;
      const double b = 2.0 * (dx * wx + dy * wy);
      if (a == 0.0 || b >= 0.0) continue;
      const double disc = b * b - 4.0 * a * c;
      if (disc < 0.0) continue;
      best = std::min(best, (-b - std::sqrt(disc)) / (2.0 * a));
    }
  }
  return best;
}

std::string agent_intent(const SceneObject& agent) {
  if (std::abs(agent.heading_rate) < DriveLayout::kTurnThreshold) return "go straight";
  return agent.heading_rate > 0.0 ? "turn right" : "turn left";
}

std::vector<Sample> gen_general(std::uint64_t seed, int n, const GenOptions& opt) {
  return run("general", Domain::kGeneral, seed, n, [&](Rng& r) { return general_draft(r, opt.extent); });
}

std::vector<Sample> gen_embodied_affordance(std::uint64_t seed, int n, const GenOptions& opt) {
  return run("embodied_affordance", Domain::kEmbodied, seed, n,
             [&](Rng& r) { return affordance_draft(r, opt.extent); });
}

std::vector<Sample> gen_embodied_spatial(std::uint64_t seed, int n, const GenOptions& opt) {
  return run("embodied_spatial", Domain::kEmbodied, seed, n, [&](Rng& r) { return spatial_draft(r, opt.extent); });
}

std::vector<Sample> gen_embodied_planning(std::uint64_t seed, int n, const GenOptions& opt) {
  return run("embodied_planning", Domain::kEmbodied, seed, n, [&](Rng& r) { return planning_draft(r, opt.extent); });
}

std::vector<Sample> gen_drive_perception(std::uint64_t seed, int n, const GenOptions& opt) {
  return run("drive_perception", Domain::kDriving, seed, n, [&](Rng& r) { return perception_draft(r, opt.extent); });
}

std::vector<Sample> gen_drive_prediction(std::uint64_t seed, int n, const GenOptions& opt) {
  return run("drive_prediction", Domain::kDriving, seed, n, [&](Rng& r) { return prediction_draft(r, opt.extent); });
}

std::vector<Sample> gen_drive_planning(std::uint64_t seed, int n, const GenOptions& opt) {
  return run("drive_planning", Domain::kDriving, seed, n,
             [&](Rng& r) { return planning_drive_draft(r, opt.extent); });
}

const std::vector<std::string>& generator_names() {
  static const std::vector<std::string> names{"general",          "embodied_affordance", "embodied_spatial",
                                              "embodied_planning", "drive_perception",    "drive_prediction",
                                              "drive_planning"};
  return names;
}

std::vector<Sample> generate_corpus(std::string_view name, std::uint64_t seed, int n, const GenOptions& opt) {
  if (name == "general") return gen_general(seed, n, opt);
  if (name == "embodied_affordance") return gen_embodied_affordance(seed, n, opt);
  if (name == "embodied_spatial") return gen_embodied_spatial(seed, n, opt);
  if (name == "embodied_planning") return gen_embodied_planning(seed, n, opt);
  if (name == "drive_perception") return gen_drive_perception(seed, n, opt);
  if (name == "drive_prediction") return gen_drive_prediction(seed, n, opt);
  if (name == "drive_planning") return gen_drive_planning(seed, n, opt);
  throw ConfigError("unknown corpus generator: " + std::string(name));
}

}  // namespace xvlm::corpus
