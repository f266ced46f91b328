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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "run_config.hpp"
#include "xvlm/synthcorpus/corpus_io.hpp"

namespace xvlm::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "xvlm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json tiny_config(int steps, int batch) {
  json stages = json::array();
  for (int k = 1; k <= 4; ++k) {
    stages.push_back({{"stage_id", k},
                      {"batch_size", k < 4 ? batch : 1},
                      {"max_steps", k < 4 ? steps : 2},
                      {"learning_rate", k < 4 ? 1e-3 : 1e-4},
                      {"max_sequence_length", 160}});
  }
  return json{{"corpora", {{"per_corpus", 24}, {"cot_per_corpus", 3}, {"rl_per_corpus", 2}}},
              {"model",
               {{"vision_dim", 8},
                {"vision_layers", 1},
                {"decoder_dim", 16},
                {"decoder_layers", 1},
                {"heads", 2},
                {"max_seq_len", 160}}},
              {"stages", stages},
              {"grpo", {{"group_size", 2}, {"max_new_tokens", 8}}},
              {"suites", {{"count", 3}}},
              {"ablation", {{"seeds", {1}}}},
              {"seed", 7}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("xvlm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string write_config(const json& j, const std::string& name = "config.json") {
    const fs::path p = root_ / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
  }

  fs::path root_;
};

TEST(StageRange, Parsing) {
  EXPECT_EQ(parse_stage_range("1-3"), std::make_pair(1, 3));
  EXPECT_EQ(parse_stage_range("4"), std::make_pair(4, 4));
  EXPECT_EQ(parse_stage_range(" 2 - 3 "), std::make_pair(2, 3));
  for (const char* bad : {"0", "5", "3-1", "1-", "a", ""}) EXPECT_THROW(parse_stage_range(bad), ConfigError) << bad;
}

TEST(RunConfigTest, DefaultsRoundTripAndRejectUnknownKeys) {
  const auto c = default_run_config();
  EXPECT_EQ(run_config_from_json(to_json(c)).digest(), c.digest());
  auto j = to_json(c);
  j["corpora"]["bogus"] = 1;
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  j = to_json(c);
  j["surprise"] = true;
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  j = to_json(c);
  j["suites"]["seed"] = j["corpora"]["seed"];
  EXPECT_THROW(run_config_from_json(j), ConfigError);
}

TEST(RunConfigTest, CommittedPresets) {
  const fs::path configs = fs::path(XVLM_SOURCE_DIR) / "configs";
  const auto def = load_run_config(configs / "default.json");
  EXPECT_EQ(def.digest(), default_run_config().digest());
  const auto paper = load_run_config(configs / "paper_profile.json");
  EXPECT_EQ(paper.profile, "paper");
  ASSERT_EQ(paper.pipeline.stages.size(), 4u);
  const auto literal = curriculum::paper_profile_stages();
  for (int i = 0; i < 4; ++i) EXPECT_EQ(paper.pipeline.stages[i], literal[i]) << "stage " << i + 1;
  EXPECT_EQ(paper.pipeline.stages[0].batch_size, 512);
  EXPECT_EQ(paper.pipeline.stages[0].learning_rate, 2e-6);
  EXPECT_EQ(paper.pipeline.stages[0].weight_decay, 0.05);
  EXPECT_EQ(paper.pipeline.stages[3].batch_size, 32);
  EXPECT_EQ(paper.pipeline.stages[3].learning_rate, 1e-6);
  EXPECT_EQ(paper.pipeline.stages[3].weight_decay, 0.0);
}

TEST_F(CliTest, GenDataManifestAndRefusal) {
  const auto cfg = write_config(tiny_config(2, 2));
  const std::string dir = (root_ / "run").string();
  auto r = run({"gen-data", "--config", cfg, "--run-dir", dir});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* sub : {"corpora", "checkpoints", "logs", "reports"}) EXPECT_TRUE(fs::is_directory(fs::path(dir) / sub));
  EXPECT_FALSE(fs::exists(fs::path(dir) / ".xvlm.lock"));
  const json manifest = json::parse(corpus::read_file(fs::path(dir) / "corpora/manifest.json"));
  EXPECT_EQ(manifest["config_digest"], load_run_config(cfg).digest());
  std::set<std::string> train_ids;
  for (const auto& c : manifest["corpora"]) {
    const auto samples = corpus::read_corpus(fs::path(dir) / "corpora" / c["path"].get<std::string>());
    EXPECT_EQ(samples.size(), c["count"].get<size_t>());
    if (c["name"] != "cot" && c["name"] != "rl") { EXPECT_EQ(samples.size(), 24u); }
    for (const auto& s : samples) train_ids.insert(s.id);
  }
  for (const auto& s : manifest["suites"]) {
    const auto samples = corpus::read_corpus(fs::path(dir) / "corpora" / s["path"].get<std::string>());
    EXPECT_EQ(samples.size(), 3u);
    for (const auto& x : samples) EXPECT_FALSE(train_ids.count(x.id)) << x.id;
  }

  r = run({"gen-data", "--config", cfg, "--run-dir", dir});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("--force"), std::string::npos);
  r = run({"gen-data", "--config", cfg, "--run-dir", dir, "--force"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(json::parse(corpus::read_file(fs::path(dir) / "corpora/manifest.json")), manifest);
}

TEST_F(CliTest, ConfigErrorsAndLocking) {
  auto bad = tiny_config(2, 2);
  bad["model"]["depth"] = 3;
  const std::string dir = (root_ / "run").string();
  EXPECT_EQ(run({"gen-data", "--config", write_config(bad, "bad.json"), "--run-dir", dir}).code, kExitConfig);
  EXPECT_EQ(run({"gen-data", "--bogus-flag"}).code, kExitConfig);
  EXPECT_EQ(run({}).code, kExitConfig);

  const auto cfg = write_config(tiny_config(2, 2));
  auto r = run({"train", "--config", cfg, "--run-dir", dir});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("gen-data"), std::string::npos) << r.err;

  fs::create_directories(dir);
  std::ofstream(fs::path(dir) / ".xvlm.lock") << "1\n";
  r = run({"gen-data", "--config", cfg, "--run-dir", dir});
  EXPECT_EQ(r.code, kExitRuntime);
  EXPECT_NE(r.err.find("locked"), std::string::npos);
  fs::remove(fs::path(dir) / ".xvlm.lock");

  r = run({"report", "--run-dir", (root_ / "missing").string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("does not exist"), std::string::npos);
}

TEST_F(CliTest, TrainResumeEvalRlReport) {
  const auto cfg = write_config(tiny_config(3, 2));
  const fs::path a = root_ / "a", b = root_ / "b";
  for (const auto& d : {a, b}) ASSERT_EQ(run({"gen-data", "--config", cfg, "--run-dir", d.string()}).code, kExitOk);

  auto r = run({"train", "--config", cfg, "--run-dir", a.string(), "--stages", "1-3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (int k = 1; k <= 3; ++k) EXPECT_TRUE(fs::exists(a / ("checkpoints/stage" + std::to_string(k) + ".ckpt")));
  EXPECT_FALSE(fs::exists(a / "checkpoints/stage4.ckpt"));

  // Interrupted after stage 1, then resumed.
  ASSERT_EQ(run({"train", "--config", cfg, "--run-dir", b.string(), "--stages", "1"}).code, kExitOk);
  r = run({"train", "--config", cfg, "--run-dir", b.string(), "--stages", "2-3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto straight = vlm::load_checkpoint(a / "checkpoints/stage3.ckpt");
  const auto resumed = vlm::load_checkpoint(b / "checkpoints/stage3.ckpt");
  EXPECT_TRUE(straight.params == resumed.params);
  EXPECT_EQ(straight.meta, resumed.meta);

  EXPECT_EQ(run({"train", "--config", cfg, "--run-dir", (root_ / "a").string(), "--stages", "4-4"}).code, kExitOk);
  EXPECT_TRUE(fs::exists(a / "checkpoints/stage4.ckpt"));

  r = run({"eval", "--config", cfg, "--run-dir", a.string(), "--oracle-responder"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto oracle1 = corpus::read_file(a / "reports/eval_oracle.json");
  ASSERT_EQ(run({"eval", "--config", cfg, "--run-dir", a.string(), "--oracle-responder"}).code, kExitOk);
  EXPECT_EQ(corpus::read_file(a / "reports/eval_oracle.json"), oracle1);
  const json oracle = json::parse(oracle1);
  for (const auto& s : oracle["suites"]) EXPECT_EQ(s["metrics"]["score"], 1.0) << s["suite"];
  for (const char* k : {"checkpoint_digest", "config_digest", "suite_seed", "responder", "timestamp"}) {
    EXPECT_TRUE(oracle["provenance"].contains(k)) << k;
  }

  r = run({"eval", "--config", cfg, "--run-dir", a.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto model1 = corpus::read_file(a / "reports/eval_stage4.json");
  ASSERT_EQ(run({"eval", "--config", cfg, "--run-dir", a.string()}).code, kExitOk);
  EXPECT_EQ(corpus::read_file(a / "reports/eval_stage4.json"), model1);

  r = run({"report", "--run-dir", a.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto summary = corpus::read_file(a / "reports/summary.md");
  EXPECT_NE(summary.find(load_run_config(cfg).digest()), std::string::npos);
  EXPECT_TRUE(fs::exists(a / "reports/plots/train_stages_1-3_loss.svg"));
  EXPECT_TRUE(fs::exists(a / "reports/plots/train_stages_4_reward.svg"));

  // An artifact from another configuration makes the directory inconsistent.
  ASSERT_EQ(run({"eval", "--config", cfg, "--run-dir", a.string(), "--oracle-responder", "--seed", "99"}).code,
            kExitOk);
  r = run({"report", "--run-dir", a.string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("mixes"), std::string::npos);
}

TEST_F(CliTest, AblationGrid) {
  const auto cfg = write_config(tiny_config(150, 4));
  const std::string dir = (root_ / "run").string();
  ASSERT_EQ(run({"gen-data", "--config", cfg, "--run-dir", dir}).code, kExitOk);
  auto r = run({"ablate", "--config", cfg, "--run-dir", dir});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto csv = corpus::read_file(fs::path(dir) / "reports/ablation.csv");
  int lines = 0;
  for (char c : csv) lines += c == '\n';
  EXPECT_EQ(lines, 6);
  for (const char* v : {"baseline", "embodied_only", "ad_only", "mixed", "multi_stage"}) {
    EXPECT_NE(csv.find(v), std::string::npos) << v;
  }
  ASSERT_EQ(run({"report", "--run-dir", dir}).code, kExitOk);
  EXPECT_TRUE(fs::exists(fs::path(dir) / "reports/plots/ablation.svg"));
}

}  // namespace
}  // namespace xvlm::cli
