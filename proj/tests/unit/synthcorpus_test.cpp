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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "oracles.hpp"
#include "xvlm/rng.hpp"
#include "xvlm/synthcorpus/corpus_io.hpp"
#include "xvlm/synthcorpus/generators.hpp"
#include "xvlm/tinyvlm/tokenizer.hpp"

namespace xvlm::corpus {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("xvlm_synth_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Mask, RleRoundTrip) {
  Mask m(5, 3);
  m.set(0, 0);
  m.set(4, 1);
  m.set(1, 2);
  m.set(2, 2);
  EXPECT_EQ(m.to_rle(), "5x3:0,1,8,1,1,2,2");
  EXPECT_EQ(Mask::from_rle(m.to_rle()), m);
  EXPECT_EQ(Mask::from_rle("2x2:4"), Mask(2, 2));
  EXPECT_THROW(Mask::from_rle("2x2:3"), ArgumentError);
  EXPECT_THROW(Mask::from_rle("2x2:3,2"), ArgumentError);
  EXPECT_THROW(Mask::from_rle("22:4"), ArgumentError);
}

TEST(Raster, MatchesIndependentOracle) {
  Rng rng(11);
  for (int i = 0; i < 5000; ++i) {
    SceneObject o;
    o.shape = kAllShapes[rng.below(3)];
    o.radius = rng.uniform(1.0, 6.0);
    o.cx = rng.uniform(o.radius, 32 - o.radius);
    o.cy = rng.uniform(o.radius, 32 - o.radius);
    ASSERT_EQ(rasterize(o, 32), oracle::rasterize(o, 32)) << i;
  }
}

TEST(Raster, PixelCenterConvention) {
  SceneObject sq{Shape::kSquare, Color::kRed, 10.0, 10.0, 2.0};
  const Mask m = rasterize(sq, 32);
  EXPECT_EQ(m.count(), 16u);  // centers 8.5 .. 11.5 on both axes
  EXPECT_TRUE(m.at(8, 8));
  EXPECT_FALSE(m.at(7, 8));
  SceneObject tri{Shape::kTriangle, Color::kRed, 16.0, 16.0, 4.0};
  const Mask t = rasterize(tri, 32);
  EXPECT_TRUE(t.at(15, 19));
  EXPECT_FALSE(t.at(12, 12));
}

TEST(Render, EmptySceneIsUniform) {
  Scene s;
  const Image img = render_scene(s);
  ASSERT_EQ(img.height, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      for (int c = 0; c < 3; ++c) ASSERT_EQ(img.at(y, x, c), img.at(0, 0, c));
    }
  }
}

TEST(Render, ObjectPixelsEqualAnalyticMask) {
  Scene s;
  s.objects.push_back({Shape::kTriangle, Color::kYellow, 12.3, 14.7, 3.2});
  s.objects.push_back({Shape::kCircle, Color::kBlue, 24.0, 6.0, 3.0});
  const Image a = render_scene(s);
  const Image b = render_scene(s);
  EXPECT_EQ(a, b);
  const Image bg = render_scene(Scene{});
  for (const auto& o : s.objects) {
    const Mask m = oracle::rasterize(o, 32);
    const Image solo = render_scene(Scene{32, {o}, {}, std::nullopt});
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const bool differs = solo.at(y, x, 0) != bg.at(y, x, 0) || solo.at(y, x, 1) != bg.at(y, x, 1) ||
                             solo.at(y, x, 2) != bg.at(y, x, 2);
        ASSERT_EQ(differs, m.at(x, y)) << x << "," << y;
      }
    }
  }
}

TEST(Scene, JsonRoundTripAndValidity) {
  const auto samples = gen_drive_prediction(3, 10);
  for (const auto& s : samples) {
    const nlohmann::json j = s.scene;
    EXPECT_EQ(j.get<Scene>(), s.scene);
    EXPECT_TRUE(s.scene.valid());
    EXPECT_TRUE(s.scene.ego.has_value());
  }
  Scene bad;
  bad.objects.push_back({Shape::kCircle, Color::kRed, 1.0, 10.0, 2.0});
  EXPECT_FALSE(bad.valid());
}

TEST(Answers, FormattingAndCanonicalPoint) {
  EXPECT_EQ(format_number(0.328125, Precision::kGrid), "0.328");
  EXPECT_EQ(format_number(-0.0001, Precision::kGrid), "0.000");
  EXPECT_EQ(std::stod(format_number(0.1 + 0.2, Precision::kExact)), 0.1 + 0.2);
  Mask ring(8, 8);
  for (int i = 0; i < 8; ++i) {
    ring.set(i, 0);
    ring.set(i, 7);
    ring.set(0, i);
    ring.set(7, i);
  }
  const Point2 c = canonical_point(ring);
  EXPECT_TRUE(ring.at(static_cast<int>(c.x), static_cast<int>(c.y)));
  SceneObject o{Shape::kCircle, Color::kRed, 10.0, 20.0, 3.0};
  const Point2 p = canonical_point(rasterize(o, 32));
  EXPECT_EQ(p.x, 10.5);
  EXPECT_EQ(p.y, 20.5);
  EXPECT_EQ(answer_payload(PointTruth{rasterize(o, 32)}, 32), "(0.328, 0.641)");
  EXPECT_EQ(direct_response("B"), "<think></think><answer>B</answer>");
}

using GenFn = std::vector<Sample> (*)(std::uint64_t, int, const GenOptions&);

struct GenCase {
  const char* name;
  GenFn fn;
  int n;
};

class Generators : public ::testing::TestWithParam<GenCase> {};

TEST_P(Generators, OracleAgreement) {
  const auto& c = GetParam();
  const auto samples = c.fn(2024, c.n, {});
  ASSERT_EQ(static_cast<int>(samples.size()), c.n);
  int agree = 0;
  for (const auto& s : samples) {
    const std::string why = oracle::check_sample(s);
    if (why.empty()) {
      ++agree;
    } else {
      ADD_FAILURE() << s.id << ": " << why << "\n" << s.prompt;
    }
  }
  EXPECT_EQ(agree, c.n);
}

TEST_P(Generators, TruthInvariants) {
  const auto& c = GetParam();
  for (const auto& s : c.fn(7, 100, {})) {
    EXPECT_EQ(task_kind_of(s.truth), s.task_kind);
    if (const auto* p = std::get_if<PointTruth>(&s.truth)) {
      EXPECT_FALSE(p->mask.empty()) << s.id;
    }
    if (const auto* b = std::get_if<BoxTruth>(&s.truth)) {
      EXPECT_LT(b->box.x0, b->box.x1);
      EXPECT_LT(b->box.y0, b->box.y1);
      EXPECT_GE(b->box.x0, 0.0);
      EXPECT_LE(b->box.y1, 1.0);
    }
    if (const auto* t = std::get_if<TrajectoryTruth>(&s.truth)) {
      EXPECT_EQ(t->waypoints.size(), 6u);
    }
    if (const auto* ch = std::get_if<ChoiceTruth>(&s.truth)) {
      for (size_t i = 0; i < ch->options.size(); ++i) {
        if (static_cast<char>('A' + i) != ch->letter) {
          EXPECT_NE(ch->options[i], ch->correct());
        }
      }
    }
  }
}

TEST_P(Generators, PromptsTokenizeWithoutUnknowns) {
  const auto& c = GetParam();
  const auto& tok = vlm::default_tokenizer();
  for (const auto& s : c.fn(5, 50, {})) {
    for (const auto& text : {s.prompt, training_target(s)}) {
      const auto ids = tok.encode(text);
      EXPECT_EQ(std::count(ids.begin(), ids.end(), vlm::kUnk), 0) << text;
      EXPECT_EQ(tok.decode(ids), text);
    }
  }
}

TEST_P(Generators, SerializedCorpusIsDeterministic) {
  const auto& c = GetParam();
  const fs::path a = temp_dir(std::string(c.name) + "_a");
  const fs::path b = temp_dir(std::string(c.name) + "_b");
  const auto pa = write_corpus(a, c.name, c.fn(99, 20, {}));
  const auto pb = write_corpus(b, c.name, c.fn(99, 20, {}));
  EXPECT_EQ(read_file(pa), read_file(pb));
  EXPECT_EQ(corpus_digest(pa), corpus_digest(pb));
  const auto pc = write_corpus(b, "other", c.fn(100, 20, {}));
  EXPECT_NE(corpus_digest(pa), corpus_digest(pc));
}

TEST_P(Generators, CorpusRoundTrip) {
  const auto& c = GetParam();
  const fs::path dir = temp_dir(std::string(c.name) + "_rt");
  const auto samples = c.fn(1, 15, {});
  const auto back = read_corpus(write_corpus(dir, c.name, samples));
  ASSERT_EQ(back.size(), samples.size());
  for (size_t i = 0; i < samples.size(); ++i) EXPECT_EQ(back[i], samples[i]) << samples[i].id;
}

INSTANTIATE_TEST_SUITE_P(All, Generators,
                         ::testing::Values(GenCase{"general", gen_general, 400},
                                           GenCase{"embodied_affordance", gen_embodied_affordance, 400},
                                           GenCase{"embodied_spatial", gen_embodied_spatial, 1000},
                                           GenCase{"embodied_planning", gen_embodied_planning, 500},
                                           GenCase{"drive_perception", gen_drive_perception, 400},
                                           GenCase{"drive_prediction", gen_drive_prediction, 400},
                                           GenCase{"drive_planning", gen_drive_planning, 400}),
                         [](const auto& info) { return std::string(info.param.name); });

TEST(Generators, TaskKindCoverage) {
  std::map<Domain, std::set<TaskKind>> seen;
  for (const auto& name : generator_names()) {
    for (const auto& s : generate_corpus(name, 3, 200)) seen[s.domain].insert(s.task_kind);
  }
  EXPECT_EQ(seen[Domain::kGeneral], (std::set<TaskKind>{TaskKind::kMcq, TaskKind::kGrounding, TaskKind::kFreeText}));
  EXPECT_EQ(seen[Domain::kEmbodied], (std::set<TaskKind>{TaskKind::kMcq, TaskKind::kPointing, TaskKind::kGrounding}));
  EXPECT_EQ(seen[Domain::kDriving], (std::set<TaskKind>{TaskKind::kMcq, TaskKind::kTrajectory}));
  EXPECT_THROW(generate_corpus("nope", 1, 1), ConfigError);
  EXPECT_THROW(gen_general(1, 0), ArgumentError);
}

TEST(Generators, AffordanceOnlyPointingOrGrounding) {
  for (const auto& s : gen_embodied_affordance(7, 100)) {
    EXPECT_TRUE(s.task_kind == TaskKind::kPointing || s.task_kind == TaskKind::kGrounding);
  }
}

TEST(Generators, CountAnswerMatchesScene) {
  for (const auto& s : gen_embodied_spatial(8, 300)) {
    if (s.subtask != "count") continue;
    const Shape shape = parse_shape(s.question.at("shape").get<std::string>());
    int k = 0;
    for (const auto& o : s.scene.objects) k += o.shape == shape;
    EXPECT_EQ(std::get<ChoiceTruth>(s.truth).correct(), std::to_string(k));
  }
}

TEST(Generators, PlanningHistoryEdges) {
  int empty = 0, last = 0;
  for (const auto& s : gen_embodied_planning(4, 200)) {
    const auto script = s.question.at("script").get<std::vector<std::string>>();
    const int h = s.question.at("history").get<int>();
    const auto& correct = std::get<ChoiceTruth>(s.truth).correct();
    if (h == 0) {
      ++empty;
      EXPECT_EQ(correct, script.front());
      EXPECT_NE(s.prompt.find("Done: nothing."), std::string::npos);
    }
    if (h == static_cast<int>(script.size()) - 1) {
      ++last;
      EXPECT_EQ(correct, script.back());
    }
  }
  EXPECT_GT(empty, 0);
  EXPECT_GT(last, 0);
}

TEST(Generators, DriveColorOnlyForPresentColors) {
  for (const auto& s : gen_drive_perception(9, 200)) {
    if (s.subtask != "color") continue;
    const auto& correct = std::get<ChoiceTruth>(s.truth).correct();
    bool present = false;
    for (const auto& o : s.scene.objects) present |= color_name(o.color) == correct;
    EXPECT_TRUE(present);
  }
}

TEST(Kinematics, ZeroHeadingRateIsStraight) {
  SceneObject a{Shape::kCircle, Color::kRed, 10, 10, 2, ObjectKind::kAgent, -M_PI / 2, 4.0, 0.0};
  EXPECT_EQ(agent_intent(a), "go straight");
  EXPECT_EQ(oracle::integrate_intent(a, 1.0), "go straight");
  a.heading_rate = 0.9;
  EXPECT_EQ(agent_intent(a), "turn right");
  EXPECT_EQ(oracle::integrate_intent(a, 1.0), "turn right");
  a.heading_rate = -0.9;
  EXPECT_EQ(oracle::integrate_intent(a, 1.0), "turn left");
}

TEST(Kinematics, AdvanceMatchesIntegration) {
  SceneObject a{Shape::kCircle, Color::kRed, 10, 20, 2, ObjectKind::kAgent, -M_PI / 2, 4.0, 1.2};
  const SceneObject b = advance(a, 1.0);
  double x = a.cx, y = a.cy, th = a.heading;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double mid = th + 0.5 * a.heading_rate / n;
    x += a.speed / n * std::cos(mid);
    y += a.speed / n * std::sin(mid);
    th += a.heading_rate / n;
  }
  EXPECT_NEAR(b.cx, x, 1e-8);
  EXPECT_NEAR(b.cy, y, 1e-8);
}

TEST(Kinematics, StraightWaypointsAreCollinearAndEvenlySpaced) {
  EgoState ego{16, 27, -M_PI / 2, 4.0, 2.0};
  const auto w = arc_waypoints(ego, 0.0, 3.0, 0.5);
  ASSERT_EQ(w.size(), 6u);
  Point2 prev{ego.x, ego.y};
  for (const auto& p : w) {
    EXPECT_NEAR(std::hypot(p.x - prev.x, p.y - prev.y), 2.0, 1e-12);
    EXPECT_NEAR(p.x, 16.0, 1e-12);
    prev = p;
  }
}

TEST(Kinematics, CurvedWaypointsMatchClosedFormArc) {
  Rng rng(5);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    EgoState ego{rng.uniform(8, 24), rng.uniform(20, 28), rng.uniform(-M_PI, M_PI), rng.uniform(1, 6), 2.0};
    const double k = rng.bernoulli(0.5) ? 0.06 : -0.06;
    const auto w = arc_waypoints(ego, k, 3.0, 0.5);
    const auto ref = oracle::arc_closed_form(ego, k, 6, 0.5);
    for (size_t j = 0; j < w.size(); ++j) worst = std::max(worst, std::hypot(w[j].x - ref[j].x, w[j].y - ref[j].y));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(CorpusIo, PngRoundTripIsExact) {
  const auto s = gen_drive_perception(1, 1)[0];
  const std::string png = encode_png(s.images[0]);
  EXPECT_EQ(decode_png(png), s.images[0]);
  EXPECT_EQ(encode_png(decode_png(png)), png);
  EXPECT_THROW(decode_png("not a png"), ArgumentError);
  EXPECT_THROW(decode_png(png.substr(0, png.size() / 2)), ArgumentError);
}

TEST(CorpusIo, RejectsWrongVersion) {
  const auto s = gen_general(1, 1)[0];
  auto j = sample_to_json(s, {});
  j["format_version"] = 99;
  EXPECT_THROW(sample_from_json(j, {}), ArgumentError);
  j["format_version"] = kFormatVersion;
  j["task_kind"] = "trajectory";
  EXPECT_THROW(sample_from_json(j, {}), ArgumentError);
}

}  // namespace
}  // namespace xvlm::corpus
