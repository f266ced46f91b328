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

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include "xvlm/synthcorpus/generators.hpp"

namespace xvlm::oracle {

using namespace xvlm::corpus;

Mask rasterize(const SceneObject& o, int extent) {
  Mask m(extent, extent);
  auto fill_row = [&](int y, double xlo, double xhi) {
    const int a = std::max(0, static_cast<int>(std::ceil(xlo - 0.5)));
    const int b = std::min(extent - 1, static_cast<int>(std::floor(xhi - 0.5)));
    for (int x = a; x <= b; ++x) m.set(x, y);
  };
  for (int y = 0; y < extent; ++y) {
    const double py = y + 0.5;
    const double dy = py - o.cy;
    if (o.shape == Shape::kCircle) {
      const double s = o.radius * o.radius - dy * dy;
      if (s < 0) continue;
      const double half = std::sqrt(s);
      fill_row(y, o.cx - half, o.cx + half);
    } else if (o.shape == Shape::kSquare) {
      if (std::abs(dy) > o.radius) continue;
      fill_row(y, o.cx - o.radius, o.cx + o.radius);
    } else {
      // Vertices in clockwise screen order: apex, bottom-right, bottom-left.
      const double ax = o.cx, ay = o.cy - o.radius;
      const double bx = o.cx + o.radius, by = o.cy + o.radius;
      const double cx = o.cx - o.radius, cy = o.cy + o.radius;
      for (int x = 0; x < extent; ++x) {
        const double px = x + 0.5;
        const double e1 = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
        const double e2 = (cx - bx) * (py - by) - (cy - by) * (px - bx);
        const double e3 = (ax - cx) * (py - cy) - (ay - cy) * (px - cx);
        if (e1 >= 0 && e2 >= 0 && e3 >= 0) m.set(x, y);
      }
    }
  }
  return m;
}

std::vector<Point2> arc_closed_form(const EgoState& ego, double k, int steps, double dt) {
  std::vector<Point2> out;
  const double th = ego.heading;
  for (int i = 1; i <= steps; ++i) {
    const double t = i * dt;
    if (k == 0.0) {
      out.push_back({ego.x + ego.speed * t * std::cos(th), ego.y + ego.speed * t * std::sin(th)});
      continue;
    }
    const double ox = ego.x - std::sin(th) / k;
    const double oy = ego.y + std::cos(th) / k;
    const double phi = th + k * ego.speed * t;
    out.push_back({ox + std::sin(phi) / k, oy - std::cos(phi) / k});
  }
  return out;
}

std::string integrate_intent(const SceneObject& a, double horizon) {
  const int steps = 10000;
  const double dt = horizon / steps;
  double x = a.cx, y = a.cy, th = a.heading;
  for (int i = 0; i < steps; ++i) {
    const double mid = th + 0.5 * a.heading_rate * dt;
    x += a.speed * dt * std::cos(mid);
    y += a.speed * dt * std::sin(mid);
    th += a.heading_rate * dt;
  }
  if (std::abs(th - a.heading) < DriveLayout::kTurnThreshold * horizon) return "go straight";
  const double cross = std::cos(a.heading) * (y - a.cy) - std::sin(a.heading) * (x - a.cx);
  return cross > 0 ? "turn right" : "turn left";
}

namespace {

std::smatch must_match(const std::string& text, const std::string& pattern) {
  std::smatch m;
  if (!std::regex_search(text, m, std::regex(pattern))) throw std::runtime_error("prompt does not match " + pattern);
  return m;
}

// Objects named "<color> <shape>" in the scene; exactly one must exist.
const SceneObject& by_name(const Scene& s, const std::string& name) {
  const SceneObject* hit = nullptr;
  int n = 0;
  for (const auto& o : s.objects) {
    if (std::string(color_name(o.color)) + " " + std::string(shape_name(o.shape)) == name) {
      hit = &o;
      ++n;
    }
  }
  if (n != 1) throw std::runtime_error("name '" + name + "' matches " + std::to_string(n) + " objects");
  return *hit;
}

std::string full_name(const SceneObject& o) {
  return std::string(color_name(o.color)) + " " + std::string(shape_name(o.shape));
}

std::string check_choice(const Sample& s, const std::string& correct, const std::set<std::string>& allowed = {}) {
  const auto* c = std::get_if<ChoiceTruth>(&s.truth);
  if (!c) return "truth is not a choice";
  std::set<std::string> uniq(c->options.begin(), c->options.end());
  if (uniq.size() != c->options.size()) return "duplicate options";
  if (c->correct() != correct) return "letter points to '" + c->correct() + "', oracle says '" + correct + "'";
  for (const auto& o : c->options) {
    if (!allowed.empty() && !allowed.count(o)) return "option '" + o + "' not allowed";
  }
  // The prompt lists the options in order.
  for (size_t i = 0; i < c->options.size(); ++i) {
    const std::string line = std::string("\n") + static_cast<char>('A' + i) + ". " + c->options[i];
    if (s.prompt.find(line) == std::string::npos) return "option missing from prompt";
  }
  return "";
}

std::set<std::string> scene_names(const Scene& s) {
  std::set<std::string> out;
  for (const auto& o : s.objects) out.insert(full_name(o));
  return out;
}

const std::string kName = "(red|green|blue|yellow|purple) (circle|square|triangle)";

std::string check(const Sample& s) {
  const Scene& sc = s.scene;
  const int e = sc.extent;
  const std::string& st = s.subtask;
  if (!sc.valid()) return "scene violates invariants";
  if (st == "shape_name") {
    const auto m = must_match(s.prompt, "What shape is the (\\w+) object\\?");
    std::vector<const SceneObject*> hits;
    for (const auto& o : sc.objects) {
      if (color_name(o.color) == m[1].str()) hits.push_back(&o);
    }
    if (hits.size() != 1) return "color not unique";
    return check_choice(s, std::string(shape_name(hits[0]->shape)));
  }
  if (st == "color_name") {
    const auto m = must_match(s.prompt, "What color is the (\\w+)\\?");
    std::vector<const SceneObject*> hits;
    for (const auto& o : sc.objects) {
      if (shape_name(o.shape) == m[1].str()) hits.push_back(&o);
    }
    if (hits.size() != 1) return "shape not unique";
    return check_choice(s, std::string(color_name(hits[0]->color)));
  }
  if (st == "name_shape") {
    const auto m = must_match(s.prompt, "Name the shape of the (\\w+) object\\.");
    std::vector<const SceneObject*> hits;
    for (const auto& o : sc.objects) {
      if (color_name(o.color) == m[1].str()) hits.push_back(&o);
    }
    if (hits.size() != 1) return "color not unique";
    const auto* t = std::get_if<TextTruth>(&s.truth);
    if (!t || t->text != shape_name(hits[0]->shape)) return "text mismatch";
    return "";
  }
  if (st == "ground" || st == "ground_object") {
    const auto m = must_match(s.prompt, "^Locate the " + kName + "\\.$");
    const SceneObject& o = by_name(sc, m[1].str() + " " + m[2].str());
    const auto* b = std::get_if<BoxTruth>(&s.truth);
    if (!b) return "truth is not a box";
    const Box want{(o.cx - o.radius) / e, (o.cy - o.radius) / e, (o.cx + o.radius) / e, (o.cy + o.radius) / e};
    if (!(b->box == want)) return "box mismatch";
    if (!(want.x0 < want.x1 && want.y0 < want.y1 && want.x0 >= 0 && want.y1 <= 1)) return "box out of range";
    return "";
  }
  if (st == "point_object") {
    const auto m = must_match(s.prompt, "^Point to the " + kName + "\\.$");
    const SceneObject& o = by_name(sc, m[1].str() + " " + m[2].str());
    const auto* p = std::get_if<PointTruth>(&s.truth);
    if (!p) return "truth is not a mask";
    if (!(p->mask == oracle::rasterize(o, e))) return "object mask mismatch";
    return "";
  }
  if (st == "point_free") {
    const auto m = must_match(s.prompt, "^Point to free space (left of|right of|above|below) the " + kName + "\\.$");
    const SceneObject& ref = by_name(sc, m[2].str() + " " + m[3].str());
    const std::string rel = m[1].str();
    Mask occupied(e, e);
    for (const auto& o : sc.objects) {
      const Mask r = oracle::rasterize(o, e);
      for (size_t i = 0; i < r.bits.size(); ++i) occupied.bits[i] |= r.bits[i];
    }
    Mask want(e, e);
    for (int y = 0; y < e; ++y) {
      for (int x = 0; x < e; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const bool row_band = std::abs(py - ref.cy) <= ref.radius;
        const bool col_band = std::abs(px - ref.cx) <= ref.radius;
        bool in = (rel == "left of" && row_band && px < ref.cx - ref.radius) ||
                  (rel == "right of" && row_band && px > ref.cx + ref.radius) ||
                  (rel == "above" && col_band && py < ref.cy - ref.radius) ||
                  (rel == "below" && col_band && py > ref.cy + ref.radius);
        if (in && !occupied.at(x, y)) want.set(x, y);
      }
    }
    const auto* p = std::get_if<PointTruth>(&s.truth);
    if (!p) return "truth is not a mask";
    if (want.empty()) return "empty free region";
    if (!(p->mask == want)) return "free-space mask mismatch";
    return "";
  }
  if (st == "left_of" || st == "right_of" || st == "above" || st == "below") {
    const auto m = must_match(s.prompt, "^Which object is (left of|right of|above|below) the " + kName + "\\?");
    const SceneObject& ref = by_name(sc, m[2].str() + " " + m[3].str());
    std::vector<std::string> sat;
    for (const auto& o : sc.objects) {
      if (&o == &ref) continue;
      const bool ok = (st == "left_of" && o.cx < ref.cx) || (st == "right_of" && o.cx > ref.cx) ||
                      (st == "above" && o.cy < ref.cy) || (st == "below" && o.cy > ref.cy);
      if (ok) sat.push_back(full_name(o));
    }
    if (sat.size() != 1) return "relation satisfied by " + std::to_string(sat.size()) + " objects";
    auto allowed = scene_names(sc);
    allowed.erase(full_name(ref));
    return check_choice(s, sat[0], allowed);
  }
  if (st == "closest_to_edge") {
    const SceneObject* best = nullptr;
    double bd = 1e300;
    for (const auto& o : sc.objects) {
      const double d = std::min(std::min(o.cx, e - o.cx), std::min(o.cy, e - o.cy));
      if (d < bd) {
        bd = d;
        best = &o;
      }
    }
    return check_choice(s, full_name(*best), scene_names(sc));
  }
  if (st == "count" && s.domain == Domain::kEmbodied) {
    const auto m = must_match(s.prompt, "^How many (circles|squares|triangles) are there\\?");
    const std::string shape = m[1].str().substr(0, m[1].str().size() - 1);
    int k = 0;
    for (const auto& o : sc.objects) k += shape_name(o.shape) == shape;
    return check_choice(s, std::to_string(k));
  }
  if (st == "next_step") {
    const auto m = must_match(s.prompt, "^Goal: put the " + kName + " on the " + kName + ", then the " + kName +
                                            " on the " + kName + "\\. Done: ([^.]*)\\. Next step\\?");
    std::vector<std::string> script{"pick " + m[1].str() + " " + m[2].str(), "place on " + m[3].str() + " " + m[4].str(),
                                    "pick " + m[5].str() + " " + m[6].str(), "place on " + m[7].str() + " " + m[8].str()};
    for (int i = 1; i <= 8; i += 2) by_name(sc, m[i].str() + " " + m[i + 1].str());
    // Replay the stated history against the script.
    std::vector<std::string> done;
    if (m[9].str() != "nothing") {
      std::stringstream ss(m[9].str());
      std::string step;
      while (std::getline(ss, step, ',')) {
        if (!step.empty() && step[0] == ' ') step.erase(0, 1);
        done.push_back(step);
      }
    }
    if (done.size() >= script.size()) return "history covers the whole script";
    for (size_t i = 0; i < done.size(); ++i) {
      if (done[i] != script[i]) return "history is not a script prefix";
    }
    return check_choice(s, script[done.size()], std::set<std::string>(script.begin(), script.end()));
  }
  if (st == "count" && s.domain == Domain::kDriving) {
    int k = 0;
    for (const auto& o : sc.objects) k += o.kind == ObjectKind::kAgent;
    return check_choice(s, std::to_string(k));
  }
  if (st == "color") {
    const auto m = must_match(s.prompt, "^What color is the (circle|square|triangle) agent\\?");
    std::vector<const SceneObject*> hits;
    for (const auto& o : sc.objects) {
      if (o.kind == ObjectKind::kAgent && shape_name(o.shape) == m[1].str()) hits.push_back(&o);
    }
    if (hits.size() != 1) return "shape not unique";
    return check_choice(s, std::string(color_name(hits[0]->color)));
  }
  if (st == "nearest") {
    const SceneObject* best = nullptr;
    double bd = 1e300;
    for (const auto& o : sc.objects) {
      const double d = std::hypot(o.cx - sc.ego->x, o.cy - sc.ego->y);
      if (o.kind == ObjectKind::kAgent && d < bd) {
        bd = d;
        best = &o;
      }
    }
    return check_choice(s, full_name(*best), scene_names(sc));
  }
  if (st == "intent") {
    const auto m = must_match(s.prompt, "What will the " + kName + " do\\?");
    const SceneObject& a = by_name(sc, m[1].str() + " " + m[2].str());
    if (s.images.size() != 2) return "expected two frames";
    return check_choice(s, integrate_intent(a, DriveLayout::kPredictionGap),
                        {"go straight", "turn left", "turn right", "reverse"});
  }
  if (st == "meta_action") {
    const auto m = must_match(s.prompt, "^Route: (go straight|turn left|turn right)\\.");
    bool blocked = false;
    for (const auto& o : sc.objects) {
      const double ahead = sc.ego->y - o.cy;
      if (std::abs(o.cx - sc.ego->x) < DriveLayout::kLaneWidth / 2 && ahead > 0 &&
          ahead <= DriveLayout::kStopDistance) {
        blocked = true;
      }
    }
    const std::string want = blocked ? "stop" : m[1].str() == "go straight" ? "keep lane" : m[1].str();
    return check_choice(s, want, {"stop", "keep lane", "turn left", "turn right"});
  }
  if (st == "trajectory") {
    const auto m = must_match(s.prompt, "^Route: (go straight|turn left|turn right)\\. Speed (\\d+)\\.");
    const double k = m[1].str() == "turn left" ? -0.06 : m[1].str() == "turn right" ? 0.06 : 0.0;
    EgoState ego = *sc.ego;
    ego.speed = std::stod(m[2].str());
    if (ego.speed != sc.ego->speed) return "speed in prompt differs from scene";
    const auto want = arc_closed_form(ego, k, 6, 0.5);
    const auto* t = std::get_if<TrajectoryTruth>(&s.truth);
    if (!t || t->waypoints.size() != want.size() || t->dt != 0.5) return "trajectory shape mismatch";
    for (size_t i = 0; i < want.size(); ++i) {
      if (std::hypot(t->waypoints[i].x - want[i].x, t->waypoints[i].y - want[i].y) >= 1e-9) {
        return "waypoint " + std::to_string(i) + " differs";
      }
    }
    return "";
  }
  return "no oracle for subtask " + st;
}

}  // namespace

std::string check_sample(const Sample& s) {
  try {
    if (task_kind_of(s.truth) != s.task_kind) return "truth variant does not match task kind";
    return check(s);
  } catch (const std::exception& e) {
    return e.what();
  }
}

}  // namespace xvlm::oracle
