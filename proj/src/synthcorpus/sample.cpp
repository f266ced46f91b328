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

#include "xvlm/synthcorpus/sample.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace xvlm::corpus {

std::string_view domain_name(Domain d) {
  switch (d) {
    case Domain::kGeneral: return "general";
    case Domain::kEmbodied: return "embodied";
    case Domain::kDriving: return "driving";
  }
  return "?";
}

std::string_view task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::kMcq: return "mcq";
    case TaskKind::kPointing: return "pointing";
    case TaskKind::kGrounding: return "grounding";
    case TaskKind::kTrajectory: return "trajectory";
    case TaskKind::kFreeText: return "freetext";
  }
  return "?";
}

Domain parse_domain(std::string_view s) {
  for (Domain d : {Domain::kGeneral, Domain::kEmbodied, Domain::kDriving}) {
    if (domain_name(d) == s) return d;
  }
  throw ArgumentError("unknown domain: " + std::string(s));
}

TaskKind parse_task_kind(std::string_view s) {
  for (TaskKind k : {TaskKind::kMcq, TaskKind::kPointing, TaskKind::kGrounding, TaskKind::kTrajectory,
                     TaskKind::kFreeText}) {
    if (task_kind_name(k) == s) return k;
  }
  throw ArgumentError("unknown task kind: " + std::string(s));
}

TaskKind task_kind_of(const GroundTruth& truth) {
  switch (truth.index()) {
    case 0: return TaskKind::kMcq;
    case 1: return TaskKind::kPointing;
    case 2: return TaskKind::kGrounding;
    case 3: return TaskKind::kTrajectory;
    default: return TaskKind::kFreeText;
  }
}

bool Sample::operator==(const Sample& o) const {
  return id == o.id && corpus == o.corpus && domain == o.domain && task_kind == o.task_kind &&
         subtask == o.subtask && prompt == o.prompt && images == o.images && truth == o.truth &&
         scene == o.scene && question == o.question && cot == o.cot && target == o.target;
}

Point2 canonical_point(const Mask& mask) {
  double sx = 0.0, sy = 0.0;
  size_t n = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      sx += x + 0.5;
      sy += y + 0.5;
      ++n;
    }
  }
  if (n == 0) throw ArgumentError("canonical point of an empty mask");
  const double mx = sx / n, my = sy / n;
  const int px = static_cast<int>(std::floor(mx));
  const int py = static_cast<int>(std::floor(my));
  if (px >= 0 && py >= 0 && px < mask.width && py < mask.height && mask.at(px, py)) {
    return {px + 0.5, py + 0.5};
  }
  double best = std::numeric_limits<double>::infinity();
  Point2 out;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      const double d = std::hypot(x + 0.5 - mx, y + 0.5 - my);
      if (d < best) {
        best = d;
        out = {x + 0.5, y + 0.5};
      }
    }
  }
  return out;
}

std::string format_number(double v, Precision precision) {
  char buf[40];
  if (precision == Precision::kGrid) {
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    if (std::string_view(buf) == "-0.000") return "0.000";
  } else {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
  }
  return buf;
}

namespace {

std::string pair_text(double x, double y, Precision p) {
  return "(" + format_number(x, p) + ", " + format_number(y, p) + ")";
}

}  // namespace

std::string answer_payload(const GroundTruth& truth, int extent, Precision p) {
  const double e = extent;
  struct Visitor {
    double e;
    Precision p;
    std::string operator()(const ChoiceTruth& c) const { return std::string(1, c.letter); }
    std::string operator()(const PointTruth& t) const {
      const Point2 c = canonical_point(t.mask);
      return pair_text(c.x / e, c.y / e, p);
    }
    std::string operator()(const BoxTruth& b) const {
      return "(" + format_number(b.box.x0, p) + ", " + format_number(b.box.y0, p) + ", " +
             format_number(b.box.x1, p) + ", " + format_number(b.box.y1, p) + ")";
    }
    std::string operator()(const TrajectoryTruth& t) const {
      std::string out = "[";
      for (size_t i = 0; i < t.waypoints.size(); ++i) {
        if (i) out += "; ";
        out += pair_text(t.waypoints[i].x / e, t.waypoints[i].y / e, p);
      }
      return out + "]";
    }
    std::string operator()(const TextTruth& t) const { return t.text; }
  };
  return std::visit(Visitor{e, p}, truth);
}

std::string direct_response(std::string_view payload) {
  return "<think></think><answer>" + std::string(payload) + "</answer>";
}

std::string training_target(const Sample& sample) {
  if (!sample.target.empty()) return sample.target;
  return direct_response(answer_payload(sample.truth, sample.scene.extent));
}

std::string mcq_prompt(std::string_view question, const std::vector<std::string>& options) {
  std::string out(question);
  for (size_t i = 0; i < options.size(); ++i) {
    out += "\n";
    out += static_cast<char>('A' + i);
    out += ". " + options[i];
  }
  return out;
}

void to_json(nlohmann::json& j, const GroundTruth& truth) {
  struct Visitor {
    nlohmann::json operator()(const ChoiceTruth& c) const {
      return {{"type", "choice"}, {"letter", std::string(1, c.letter)}, {"options", c.options}};
    }
    nlohmann::json operator()(const PointTruth& t) const {
      return {{"type", "point_mask"}, {"mask", t.mask.to_rle()}};
    }
    nlohmann::json operator()(const BoxTruth& b) const {
      return {{"type", "box"}, {"box", {b.box.x0, b.box.y0, b.box.x1, b.box.y1}}};
    }
    nlohmann::json operator()(const TrajectoryTruth& t) const {
      auto pts = nlohmann::json::array();
      for (const auto& w : t.waypoints) pts.push_back({w.x, w.y});
      return {{"type", "trajectory"}, {"dt", t.dt}, {"waypoints", pts}};
    }
    nlohmann::json operator()(const TextTruth& t) const { return {{"type", "text"}, {"text", t.text}}; }
  };
  j = std::visit(Visitor{}, truth);
}

GroundTruth truth_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "choice") {
    ChoiceTruth c;
    const std::string letter = j.at("letter").get<std::string>();
    if (letter.size() != 1) throw ArgumentError("bad choice letter");
    c.letter = letter[0];
    c.options = j.at("options").get<std::vector<std::string>>();
    if (c.letter < 'A' || c.letter >= 'A' + static_cast<int>(c.options.size())) {
      throw ArgumentError("choice letter out of range");
    }
    return c;
  }
  if (type == "point_mask") return PointTruth{Mask::from_rle(j.at("mask").get<std::string>())};
  if (type == "box") {
    const auto& b = j.at("box");
    return BoxTruth{Box{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                        b.at(3).get<double>()}};
  }
  if (type == "trajectory") {
    TrajectoryTruth t;
    t.dt = j.at("dt").get<double>();
    for (const auto& w : j.at("waypoints")) t.waypoints.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
    return t;
  }
  if (type == "text") return TextTruth{j.at("text").get<std::string>()};
  throw ArgumentError("unknown truth type: " + type);
}

}  // namespace xvlm::corpus
