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

#include "xvlm/cot/cot.hpp"

#include <cmath>

#include "xvlm/synthcorpus/generators.hpp"

namespace xvlm::cot {

namespace {

using corpus::ChoiceTruth;
using corpus::Sample;
using corpus::SceneObject;

std::string num(double v) { return std::to_string(std::lround(v)); }

std::string at(const SceneObject& o) { return "(" + num(o.cx) + ", " + num(o.cy) + ")"; }

std::string letter_of(size_t i) { return std::string(1, static_cast<char>('A' + i)); }

const SceneObject* find_named(const corpus::Scene& s, const std::string& name) {
  for (const auto& o : s.objects) {
    if (o.name() == name) return &o;
  }
  return nullptr;
}

std::vector<std::string> mcq_steps(const Sample& s) {
  const auto& c = std::get<ChoiceTruth>(s.truth);
  const auto& sc = s.scene;
  const std::string& st = s.subtask;
  std::vector<std::string> out;
  auto target = [&]() -> const SceneObject& { return sc.objects.at(s.question.at("target").get<int>()); };
  if (st == "shape_name") {
    const auto& o = target();
    out.push_back("The " + std::string(corpus::color_name(o.color)) + " object is a " +
                  std::string(corpus::shape_name(o.shape)) + ".");
  } else if (st == "color_name") {
    const auto& o = target();
    out.push_back("The " + std::string(corpus::shape_name(o.shape)) + " is " +
                  std::string(corpus::color_name(o.color)) + ".");
  } else if (st == "left_of" || st == "right_of" || st == "above" || st == "below") {
    const auto& ref = sc.objects.at(s.question.at("reference").get<int>());
    const bool horizontal = st == "left_of" || st == "right_of";
    const std::string axis = horizontal ? "x" : "y";
    out.push_back("The " + ref.name() + " is at " + axis + " " + num(horizontal ? ref.cx : ref.cy) + ".");
    for (size_t i = 0; i < c.options.size(); ++i) {
      const SceneObject* o = find_named(sc, c.options[i]);
      const double v = horizontal ? o->cx : o->cy;
      const bool yes = (st == "left_of" && o->cx < ref.cx) || (st == "right_of" && o->cx > ref.cx) ||
                       (st == "above" && o->cy < ref.cy) || (st == "below" && o->cy > ref.cy);
      out.push_back(letter_of(i) + " is at " + axis + " " + num(v) + ", " + (yes ? "yes" : "no") + ".");
    }
  } else if (st == "closest_to_edge") {
    for (size_t i = 0; i < c.options.size(); ++i) {
      const SceneObject* o = find_named(sc, c.options[i]);
      const double d = std::min(std::min(o->cx, sc.extent - o->cx), std::min(o->cy, sc.extent - o->cy));
      out.push_back(letter_of(i) + " is " + num(d) + " from the edge.");
    }
  } else if (st == "count" && s.domain == corpus::Domain::kEmbodied) {
    const auto shape = corpus::parse_shape(s.question.at("shape").get<std::string>());
    std::string list;
    int k = 0;
    for (const auto& o : sc.objects) {
      if (o.shape != shape) continue;
      list += (k++ ? ", " : "") + std::string(corpus::color_name(o.color));
    }
    out.push_back("The " + std::string(corpus::shape_plural(shape)) + " are: " + (k ? list : "none") + ".");
    out.push_back("That is " + std::to_string(k) + ".");
  } else if (st == "next_step") {
    const auto script = s.question.at("script").get<std::vector<std::string>>();
    const int h = s.question.at("history").get<int>();
    out.push_back("The goal has " + std::to_string(script.size()) + " steps and " + std::to_string(h) +
                  " are done.");
    out.push_back("The next step is " + script.at(h) + ".");
  } else if (st == "count") {
    std::string list;
    int k = 0;
    for (const auto& o : sc.objects) {
      if (o.kind != corpus::ObjectKind::kAgent) continue;
      list += (k++ ? ", " : "") + std::string(corpus::color_name(o.color));
    }
    out.push_back("The agents are: " + list + ".");
    out.push_back("That is " + std::to_string(k) + ".");
  } else if (st == "color") {
    const auto& o = target();
    out.push_back("The " + std::string(corpus::shape_name(o.shape)) + " agent is " +
                  std::string(corpus::color_name(o.color)) + ".");
  } else if (st == "nearest") {
    for (size_t i = 0; i < c.options.size(); ++i) {
      const SceneObject* o = find_named(sc, c.options[i]);
      out.push_back(letter_of(i) + " is " + num(std::hypot(o->cx - sc.ego->x, o->cy - sc.ego->y)) +
                    " from the ego car.");
    }
  } else if (st == "intent") {
    const auto& o = target();
    const std::string intent = corpus::agent_intent(o);
    out.push_back("The " + o.name() + " moves from " + at(o) + " to " +
                  at(corpus::advance(o, corpus::DriveLayout::kPredictionGap)) + ".");
    out.push_back(intent == "go straight" ? "It keeps its heading." : "It turns to the " + intent.substr(5) + ".");
  } else if (st == "meta_action") {
    const SceneObject* block = nullptr;
    for (const auto& o : sc.objects) {
      const double ahead = sc.ego->y - o.cy;
      if (corpus::lane_of(o.cx) == corpus::lane_of(sc.ego->x) && ahead > 0 &&
          ahead <= corpus::DriveLayout::kStopDistance) {
        block = &o;
      }
    }
    out.push_back(block ? "The " + block->name() + " is close ahead in the ego lane." : "The ego lane ahead is clear.");
    out.push_back("The route is " + s.question.at("route").get<std::string>() + ".");
  } else {
    return {};
  }
  out.push_back("Option " + std::string(1, c.letter) + " is " + c.correct() + ".");
  return out;
}

}  // namespace

std::optional<ReasoningTrace> reasoning_trace(const Sample& s) {
  ReasoningTrace t;
  const auto& sc = s.scene;
  switch (s.task_kind) {
    case corpus::TaskKind::kMcq:
      t.steps = mcq_steps(s);
      break;
    case corpus::TaskKind::kPointing:
      if (s.subtask == "point_free") {
        const auto& ref = sc.objects.at(s.question.at("reference").get<int>());
        std::string rel = s.question.at("relation").get<std::string>();
        if (rel == "left_of") rel = "left of";
        if (rel == "right_of") rel = "right of";
        t.steps.push_back("The " + ref.name() + " is at " + at(ref) + ".");
        t.steps.push_back("Free space " + rel + " it has no objects.");
      } else {
        const auto& o = sc.objects.at(s.question.at("target").get<int>());
        t.steps.push_back("The " + o.name() + " is at " + at(o) + ".");
      }
      break;
    case corpus::TaskKind::kGrounding: {
      const auto& o = sc.objects.at(s.question.at("target").get<int>());
      t.steps.push_back("The " + o.name() + " is at " + at(o) + ".");
      t.steps.push_back("Its size is " + num(2 * o.radius) + ".");
      break;
    }
    default:
      return std::nullopt;
  }
  if (t.steps.empty()) return std::nullopt;
  t.steps.push_back("So the answer is " + corpus::answer_payload(s.truth, sc.extent) + ".");
  return t;
}

std::string render_target(const ReasoningTrace& trace, std::string_view payload) {
  std::string think;
  for (size_t i = 0; i < trace.steps.size(); ++i) think += (i ? " " : "") + trace.steps[i];
  return "<think>" + think + "</think><answer>" + std::string(payload) + "</answer>";
}

std::optional<Sample> augment_with_cot(const Sample& sample) {
  auto trace = reasoning_trace(sample);
  if (!trace) return std::nullopt;
  Sample out = sample;
  out.cot = true;
  out.target = render_target(*trace, corpus::answer_payload(sample.truth, sample.scene.extent));
  return out;
}

std::vector<Sample> build_cot_corpus(const std::vector<Sample>& samples, const std::string& corpus_name) {
  std::vector<Sample> out;
  for (const auto& s : samples) {
    if (auto a = augment_with_cot(s)) {
      a->corpus = corpus_name;
      a->id = corpus_name + "-" + s.id;
      out.push_back(std::move(*a));
    }
  }
  return out;
}

}  // namespace xvlm::cot
