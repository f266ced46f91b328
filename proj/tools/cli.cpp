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

#include "cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "workflow.hpp"
#include "xvlm/cot/cot.hpp"
#include "xvlm/synthcorpus/corpus_io.hpp"

namespace xvlm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::pair<int, int> parse_stage_range(const std::string& text) {
  static const std::regex kRange(R"(^\s*([1-4])\s*(?:-\s*([1-4]))?\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, kRange)) throw ConfigError("--stages expects K or A-B with stages 1-4, got " + text);
  const int a = std::stoi(m[1]);
  const int b = m[2].matched ? std::stoi(m[2]) : a;
  if (b < a) throw ConfigError("--stages range is reversed: " + text);
  return {a, b};
}

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".xvlm.lock") {
  fs::create_directories(run_dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw Error("run directory " + run_dir.string() + " is locked by another command (" + path_.string() +
                "); remove the file if no command is running");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

struct Options {
  std::string config;
  std::string run_dir = "run";
  std::string stages;
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool oracle = false;
  std::string checkpoint;
};

struct Context {
  RunConfig config;
  std::string digest;
  fs::path run_dir;
  std::ostream& out;
};

fs::path corpora_dir(const Context& c) { return c.run_dir / "corpora"; }
fs::path checkpoints_dir(const Context& c) { return c.run_dir / "checkpoints"; }
fs::path logs_dir(const Context& c) { return c.run_dir / "logs"; }
fs::path reports_dir(const Context& c) { return c.run_dir / "reports"; }

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  corpus::write_file(path, text);
}

json read_json(const fs::path& path) {
  try {
    return json::parse(corpus::read_file(path));
  } catch (const json::exception& e) {
    throw Error("cannot parse " + path.string() + ": " + e.what());
  }
}

RunConfig resolve_config(const Options& o) {
  RunConfig config;
  const fs::path stored = fs::path(o.run_dir) / "config.json";
  if (!o.config.empty()) {
    config = load_run_config(o.config);
  } else if (fs::exists(stored)) {
    config = load_run_config(stored);
  } else {
    config = default_run_config();
  }
  if (o.seed) config.pipeline.seed = *o.seed;
  config.validate();
  return config;
}

json manifest_of(const Context& c) {
  const fs::path path = corpora_dir(c) / "manifest.json";
  if (!fs::exists(path)) {
    throw ConfigError("no corpora in " + c.run_dir.string() + "; run `xvlm gen-data --run-dir " +
                      c.run_dir.string() + "` first");
  }
  return read_json(path);
}

curriculum::Registry load_registry(const Context& c) {
  const json manifest = manifest_of(c);
  curriculum::Registry registry;
  for (const auto& entry : manifest.at("corpora")) {
    const fs::path path = corpora_dir(c) / entry.at("path").get<std::string>();
    if (!fs::exists(path)) {
      throw ConfigError("corpus file " + path.string() + " is missing; rerun `xvlm gen-data --force`");
    }
    registry[entry.at("name").get<std::string>()] = corpus::read_corpus(path);
  }
  return registry;
}

std::vector<eval::Suite> load_suites(const Context& c, const curriculum::Registry* training) {
  const json manifest = manifest_of(c);
  std::vector<eval::Suite> suites;
  for (const auto& entry : manifest.at("suites")) {
    const auto spec = entry.at("spec").get<eval::SuiteSpec>();
    eval::Suite s{spec.name, spec.capability, corpus::Domain::kGeneral, spec.task_kind,
                  corpus::read_corpus(corpora_dir(c) / entry.at("path").get<std::string>())};
    if (s.samples.empty()) throw ConfigError("suite " + spec.name + " is empty");
    s.domain = s.samples.front().domain;
    if (training) eval::assert_disjoint(s, *training);
    suites.push_back(std::move(s));
  }
  return suites;
}

json header(const Context& c, const std::string& command) {
  return json{{"type", "header"}, {"command", command}, {"config_digest", c.digest}};
}

// ---- gen-data ----

int cmd_gen_data(const Context& c, const Options& o) {
  if (fs::exists(c.run_dir)) {
    bool empty = true;
    for (const auto& e : fs::directory_iterator(c.run_dir)) {
      if (e.path().filename() != ".xvlm.lock") empty = false;
    }
    if (!empty && !o.force) {
      throw ConfigError("run directory " + c.run_dir.string() + " is not empty; pass --force to overwrite it");
    }
    for (const auto& e : fs::directory_iterator(c.run_dir)) {
      if (e.path().filename() != ".xvlm.lock") fs::remove_all(e.path());
    }
  }
  for (const auto& d : {corpora_dir(c), checkpoints_dir(c), logs_dir(c), reports_dir(c)}) fs::create_directories(d);
  write_text(c.run_dir / "config.json", to_json(c.config).dump(2) + "\n");

  const auto& plan = c.config.corpora;
  json manifest{{"config_digest", c.digest}, {"corpora", json::array()}, {"suites", json::array()}};
  const auto registry = build_registry(plan);
  for (const auto& [name, samples] : registry) {
    const std::uint64_t seed = name == curriculum::kCotCorpus ? plan.cot_seed
                               : name == curriculum::kRlCorpus ? plan.rl_seed
                                                               : plan.seed;
    const fs::path path = corpus::write_corpus(corpora_dir(c), name, samples);
    manifest["corpora"].push_back({{"name", name},
                                   {"path", fs::relative(path, corpora_dir(c)).string()},
                                   {"seed", seed},
                                   {"count", samples.size()},
                                   {"digest", corpus::corpus_digest(path)}});
    c.out << "corpus " << name << ": " << samples.size() << " samples\n";
  }

  for (const auto& spec : c.config.suites.specs()) {
    const auto suite = eval::build_suite(spec, &registry);
    const fs::path path = corpus::write_corpus(corpora_dir(c) / "suites", spec.name, suite.samples);
    manifest["suites"].push_back({{"spec", spec},
                                  {"path", fs::relative(path, corpora_dir(c)).string()},
                                  {"digest", corpus::corpus_digest(path)}});
    c.out << "suite " << spec.name << ": " << suite.samples.size() << " samples\n";
  }
  write_text(corpora_dir(c) / "manifest.json", manifest.dump(2) + "\n");
  c.out << "config digest " << c.digest << "\n";
  return kExitOk;
}

// ---- train / rl ----

curriculum::StageHooks progress_hooks(std::ostream& out) {
  curriculum::StageHooks hooks;
  hooks.on_step = [&out](const curriculum::StepRecord& r) {
    if (r.step % 100 == 0) {
      char line[128];
      std::snprintf(line, sizeof(line), "stage %d step %ld loss %.4f lr %.3g\n", r.stage, r.step, r.loss, r.lr);
      out << line << std::flush;
    }
  };
  hooks.on_rl_step = [&out](const grpo::RlRecord& r) {
    if (r.step % 20 == 0) {
      char line[160];
      std::snprintf(line, sizeof(line), "rl step %d reward %.4f format %.3f kl %.4g\n", r.step, r.mean_reward,
                    r.format_rate, r.kl);
      out << line << std::flush;
    }
  };
  return hooks;
}

int cmd_train(const Context& c, const std::string& range_text) {
  const auto [first, last] = parse_stage_range(range_text);
  const auto registry = load_registry(c);
  curriculum::PipelineConfig pc = c.config.pipeline;
  pc.stages.clear();
  for (const auto& s : c.config.pipeline.stages) {
    if (s.stage_id >= first && s.stage_id <= last) pc.stages.push_back(s);
  }
  if (pc.stages.empty()) throw ConfigError("the config defines no stages in " + range_text);

  curriculum::TrainState start;
  if (first > 1) {
    const fs::path prev = checkpoints_dir(c) / ("stage" + std::to_string(first - 1) + ".ckpt");
    if (!fs::exists(prev)) {
      throw ConfigError("stage " + std::to_string(first) + " resumes from " + prev.string() +
                        ", which does not exist; run `xvlm train --stages 1-" + std::to_string(first - 1) +
                        "` first");
    }
    start = curriculum::from_checkpoint(vlm::load_checkpoint(prev));
  } else {
    start = curriculum::TrainState::fresh(pc.model, pc.seed);
  }
  start.tags["config_digest"] = c.digest;
  fs::create_directories(checkpoints_dir(c));
  const auto result = curriculum::run_pipeline(pc, registry, start, checkpoints_dir(c), progress_hooks(c.out));

  std::string name = std::to_string(first);
  if (last != first) name += "-" + std::to_string(last);
  auto head = header(c, "train");
  head["stages"] = name;
  write_text(logs_dir(c) / ("train_stages_" + name + ".jsonl"), head.dump() + "\n" + result.log.to_jsonl());
  c.out << "trained stages " << name << "; checkpoint "
        << (checkpoints_dir(c) / ("stage" + std::to_string(last) + ".ckpt")).string() << "\n";
  return kExitOk;
}

// ---- eval ----

fs::path latest_checkpoint(const Context& c) {
  for (int k = 4; k >= 1; --k) {
    const fs::path p = checkpoints_dir(c) / ("stage" + std::to_string(k) + ".ckpt");
    if (fs::exists(p)) return p;
  }
  throw ConfigError("no checkpoint in " + checkpoints_dir(c).string() + "; run `xvlm train` first");
}

int cmd_eval(const Context& c, const Options& o) {
  const auto registry = load_registry(c);
  const auto suites = load_suites(c, &registry);
  eval::Provenance prov;
  prov.config_digest = c.digest;
  prov.suite_seed = c.config.suites.seed;
  std::string stem;
  eval::MetricReport report;
  if (o.oracle) {
    prov.checkpoint_digest = "none";
    prov.responder = "oracle";
    stem = "oracle";
    report = eval::evaluate(eval::oracle_responder(), suites, prov);
  } else {
    const fs::path path = o.checkpoint.empty() ? latest_checkpoint(c) : fs::path(o.checkpoint);
    if (!fs::exists(path)) throw ConfigError("checkpoint " + path.string() + " does not exist");
    const auto state = curriculum::from_checkpoint(vlm::load_checkpoint(path));
    prov.checkpoint_digest = vlm::params_digest(state.policy.params);
    prov.responder = "model";
    stem = path.stem().string();
    report = eval::evaluate(eval::model_responder(state.policy), suites, prov);
  }
  const fs::path out_path = reports_dir(c) / ("eval_" + stem + ".json");
  write_text(out_path, report.to_json().dump(2) + "\n");
  for (const auto& r : report.suites) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-24s %6.3f\n", r.suite.c_str(), r.score());
    c.out << line;
  }
  for (const auto& [k, v] : report.summary) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-24s %6.3f\n", k.c_str(), v);
    c.out << line;
  }
  c.out << "report " << out_path.string() << "\n";
  return kExitOk;
}

// ---- ablate ----

int cmd_ablate(const Context& c) {
  const auto registry = load_registry(c);
  const auto suites = load_suites(c, &registry);
  const auto run = run_ablation(c.config, registry, suites, &c.out);
  json tables = json::array();
  for (const auto& [seed, table] : run.per_seed) tables.push_back({{"seed", seed}, {"rows", table.to_json()}});
  write_text(reports_dir(c) / "ablation.txt", run.mean.to_text());
  write_text(reports_dir(c) / "ablation.csv", run.mean.to_csv());
  write_text(reports_dir(c) / "ablation.json", json{{"config_digest", c.digest},
                                                    {"seeds", c.config.ablation.seeds},
                                                    {"per_seed", tables},
                                                    {"mean", run.mean.to_json()}}
                                                   .dump(2) +
                                                   "\n");
  c.out << "mean over " << run.per_seed.size() << " seeds\n" << run.mean.to_text();
  return kExitOk;
}

// ---- report ----

std::string first_line(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

int cmd_report(const Context& c) {
  if (!fs::is_directory(c.run_dir)) throw ConfigError("run directory " + c.run_dir.string() + " does not exist");
  std::map<std::string, std::set<std::string>> digests;  // digest -> artifacts
  auto note = [&](const std::string& digest, const fs::path& artifact) {
    digests[digest].insert(fs::relative(artifact, c.run_dir).string());
  };
  const fs::path manifest = corpora_dir(c) / "manifest.json";
  if (fs::exists(manifest)) note(read_json(manifest).value("config_digest", "?"), manifest);

  std::vector<fs::path> logs, reports, checkpoints;
  auto collect = [](const fs::path& dir, const std::string& ext, std::vector<fs::path>& into) {
    if (!fs::is_directory(dir)) return;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ext) into.push_back(e.path());
    }
    std::sort(into.begin(), into.end());
  };
  collect(logs_dir(c), ".jsonl", logs);
  collect(reports_dir(c), ".json", reports);
  collect(checkpoints_dir(c), ".ckpt", checkpoints);
  for (const auto& p : logs) note(json::parse(first_line(p)).value("config_digest", "?"), p);
  for (const auto& p : reports) {
    const json j = read_json(p);
    note(j.contains("provenance") ? j["provenance"].value("config_digest", "?") : j.value("config_digest", "?"), p);
  }
  for (const auto& p : checkpoints) {
    const auto ck = vlm::load_checkpoint(p);
    note(ck.meta.contains("tags") ? ck.meta["tags"].value("config_digest", "?") : "?", p);
  }
  if (digests.empty()) throw ConfigError("run directory " + c.run_dir.string() + " holds no artifacts");
  if (digests.size() > 1) {
    std::ostringstream msg;
    msg << "run directory mixes artifacts from different configs:";
    for (const auto& [d, files] : digests) msg << "\n  " << d << ": " << files.size() << " artifact(s), e.g. " << *files.begin();
    throw ConfigError(msg.str());
  }
  const std::string digest = digests.begin()->first;

  const fs::path plots = reports_dir(c) / "plots";
  fs::create_directories(plots);
  std::vector<std::string> emitted;
  for (const auto& p : logs) {
    std::map<int, eval::Series> loss;
    eval::Series reward{"mean reward", {}, {}}, format{"format rate", {}, {}};
    std::ifstream in(p);
    std::string line;
    long global = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string type = j.value("type", "");
      if (type == "sft") {
        auto& s = loss[j.at("stage").get<int>()];
        s.label = "stage " + std::to_string(j.at("stage").get<int>());
        s.x.push_back(static_cast<double>(global++));
        s.y.push_back(j.at("loss").get<double>());
      } else if (type == "rl") {
        reward.x.push_back(j.at("step").get<double>());
        reward.y.push_back(j.at("mean_reward").get<double>());
        format.x.push_back(j.at("step").get<double>());
        format.y.push_back(j.at("format_rate").get<double>());
      }
    }
    const std::string stem = p.stem().string();
    if (!loss.empty()) {
      std::vector<eval::Series> series;
      for (auto& [k, s] : loss) series.push_back(std::move(s));
      write_text(plots / (stem + "_loss.svg"), eval::line_chart_svg("Training loss (" + stem + ")", "step", series));
      emitted.push_back("plots/" + stem + "_loss.svg");
    }
    if (!reward.x.empty()) {
      write_text(plots / (stem + "_reward.svg"),
                 eval::line_chart_svg("GRPO reward (" + stem + ")", "step", {reward, format}));
      emitted.push_back("plots/" + stem + "_reward.svg");
    }
  }
  const fs::path ablation = reports_dir(c) / "ablation.json";
  std::string ablation_text;
  if (fs::exists(ablation)) {
    const json j = read_json(ablation);
    const std::vector<std::string> groups{"affordance", "spatial", "plan", "embodied_avg", "driving"};
    std::vector<eval::Series> bars;
    for (const auto& row : j.at("mean")) {
      eval::Series s{row.at("variant").get<std::string>(), {}, {}};
      for (const auto& g : groups) s.y.push_back(row.at(g).get<double>());
      bars.push_back(std::move(s));
    }
    write_text(plots / "ablation.svg", eval::bar_chart_svg("Ablation (mean over seeds)", groups, bars));
    emitted.push_back("plots/ablation.svg");
    if (fs::exists(reports_dir(c) / "ablation.txt")) ablation_text = corpus::read_file(reports_dir(c) / "ablation.txt");
  }

  std::ostringstream md;
  md << "# Run summary\n\nConfig digest: `" << digest << "`\n\n## Artifacts\n\n";
  for (const auto& f : digests.begin()->second) md << "- " << f << "\n";
  for (const auto& f : emitted) md << "- reports/" << f << "\n";
  for (const auto& p : reports) {
    if (p.filename().string().rfind("eval_", 0) != 0) continue;
    const json j = read_json(p);
    md << "\n## " << p.stem().string() << "\n\n| metric | value |\n|---|---|\n";
    for (const auto& [k, v] : j.at("summary").items()) {
      char cell[32];
      std::snprintf(cell, sizeof(cell), "%.4f", v.get<double>());
      md << "| " << k << " | " << cell << " |\n";
    }
  }
  if (!ablation_text.empty()) md << "\n## Ablation\n\n```\n" << ablation_text << "```\n";
  write_text(reports_dir(c) / "summary.md", md.str());
  c.out << "wrote " << (reports_dir(c) / "summary.md").string() << " and " << emitted.size() << " plot(s)\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic embodied and driving VLM pipeline"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--run-dir", o.run_dir, "Run directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "Override the pipeline seed");
  };
  auto* gen = app.add_subcommand("gen-data", "Generate training corpora and evaluation suites");
  common(gen);
  gen->add_flag("--force", o.force, "Overwrite a non-empty run directory");
  auto* train = app.add_subcommand("train", "Run curriculum stages");
  common(train);
  train->add_option("--stages", o.stages, "Stage or range, e.g. 1-3")->default_str("1-4");
  auto* rl = app.add_subcommand("rl", "Run the GRPO stage from the stage-3 checkpoint");
  common(rl);
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on every suite");
  common(ev);
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint path (default: latest stage)");
  ev->add_flag("--oracle-responder", o.oracle, "Answer with the gold responses");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the ablation variants");
  common(ablate);
  auto* report = app.add_subcommand("report", "Render plots and a summary of a run directory");
  report->add_option("--run-dir", o.run_dir, "Run directory")->capture_default_str();
  std::string profile = "default";
  auto* show = app.add_subcommand("show-config", "Print a preset configuration as JSON");
  show->add_option("--profile", profile, "default or paper")
      ->check(CLI::IsMember({"default", "paper"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    Context c{{}, {}, o.run_dir, out};
    if (report->parsed()) return cmd_report(c);
    if (show->parsed()) {
      out << to_json(profile == "paper" ? paper_run_config() : default_run_config()).dump(2) << "\n";
      return kExitOk;
    }
    c.config = resolve_config(o);
    c.digest = c.config.digest();
    RunLock lock(c.run_dir);
    if (gen->parsed()) return cmd_gen_data(c, o);
    if (train->parsed()) return cmd_train(c, o.stages.empty() ? "1-4" : o.stages);
    if (rl->parsed()) return cmd_train(c, "4");
    if (ev->parsed()) return cmd_eval(c, o);
    if (ablate->parsed()) return cmd_ablate(c);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace xvlm::cli
