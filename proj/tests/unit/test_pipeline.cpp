// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

#include "clear/binary.hpp"
#include "clear/hash.hpp"
#include "clear/parallel.hpp"
#include "clear/pipeline.hpp"
#include "clear/synthetic.hpp"
#include "helpers.hpp"

using namespace clear;
using namespace clear::pipeline;
using json = nlohmann::json;

namespace {

fs::path small_fixture(const std::string& name, std::uint64_t seed = 1) {
  synthetic::FixtureSpec spec;
  spec.dim = 8;
  spec.classes = 3;
  spec.images_per_class = 40;
  spec.descriptors = 15;
  spec.planted_per_class = 1;
  spec.image_noise = 0.3;
  spec.seed = seed;
  const auto dir = test::scratch_dir(name);
  synthetic::write_fixture(synthetic::make_fixture(spec), dir);
  return dir;
}

json small_config(const fs::path& dir) {
  json c = fixture_config(dir);
  c["k"] = 4;
  c["score"] = {{"epochs", 3}, {"lr", 1e-3}, {"image_batch", 32}, {"descriptor_batch", 8}, {"hidden", 16}};
  c["approx"]["epochs"] = 5;
  c["approx"]["batch"] = 32;
  c["approx"]["steps"] = 2;
  c["approx"]["epsilon"] = 1e-3;
  c["head"] = {{"epochs", 10}, {"lr", 0.05}, {"batch", 32}};
  c["explain"] = {{"limit", 3}};
  return c;
}

void write_json(const fs::path& p, const json& j) { binary::write_text(p, j.dump(2)); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CLEAR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config: parse, defaults, extends, relative paths") {
  const auto dir = small_fixture("cfg");
  write_json(dir / "base.json", {{"paths", {{"manifest", "manifest.json"}}}, {"k", 3}, {"approx", {{"lambda", 0.5}}}});
  fs::create_directories(dir / "sub");
  write_json(dir / "sub" / "child.json", {{"extends", "../base.json"}, {"seed", 7}, {"approx", {{"regularizer", "euclidean"}}}});
  const auto cfg = load_config(dir / "sub" / "child.json");
  CHECK(cfg.k == 3);
  CHECK(cfg.seed == 7);
  CHECK(cfg.approx.lambda == 0.5);
  CHECK(cfg.approx.regularizer == bottleneck::Regularizer::Euclidean);
  CHECK(cfg.paths.manifest == fs::absolute(dir / "manifest.json").lexically_normal());
  CHECK(cfg.paths.out == fs::absolute(dir / "sub" / "out").lexically_normal());
  CHECK(cfg.approx.k == 3);
  CHECK(cfg.score.seed == 7);
  CHECK(cfg.head.seed == 7);
  cfg.validate();

  // The resolved config reloads to the same values.
  const auto again = parse_config(config_to_json(cfg), dir);
  CHECK(config_to_json(again) == config_to_json(cfg));

  Overrides o;
  o.k = 2;
  o.method = "random";
  o.seed = 11;
  auto c2 = cfg;
  apply_overrides(c2, o);
  CHECK(c2.k == 2);
  CHECK(c2.approx.k == 2);
  CHECK(c2.selection.method == Method::Random);
  CHECK(c2.approx.seed == 11);
}

TEST_CASE("config: rejects unknown keys, bad values, missing files") {
  const auto dir = small_fixture("cfg_bad");
  auto c = small_config(dir);
  c["approx"]["lamda"] = 1.0;
  CHECK_ERROR(parse_config(c, dir), ErrorCode::Config, "invalid_config");
  c = small_config(dir);
  c["approx"]["regularizer"] = "l2";
  CHECK_ERROR(parse_config(c, dir), ErrorCode::Config, "invalid_config");
  c = small_config(dir);
  c["selection"]["method"] = "greedy";
  CHECK_ERROR(parse_config(c, dir), ErrorCode::Config, "invalid_config");
  c = small_config(dir);
  c["k"] = -1;
  CHECK_ERROR(parse_config(c, dir), ErrorCode::Config, "invalid_config");
  c = small_config(dir);
  c["k"] = 0;
  CHECK_ERROR(parse_config(c, dir).validate(), ErrorCode::Config, "invalid_config");
  c = small_config(dir);
  c["paths"]["manifest"] = (dir / "nope.json").string();
  CHECK_ERROR(parse_config(c, dir).validate(), ErrorCode::Config, "missing_path");
  CHECK_ERROR(load_config(dir / "absent.json"), ErrorCode::Config, "missing_path");
  write_json(dir / "loop.json", {{"extends", "loop.json"}});
  CHECK_ERROR(load_config(dir / "loop.json"), ErrorCode::Config, "invalid_config");
}

TEST_CASE("stages: missing upstream artifact is a config error") {
  const auto dir = small_fixture("upstream");
  auto cfg = parse_config(small_config(dir), dir);
  CHECK_ERROR(cmd_select(cfg), ErrorCode::Config, "missing_artifact");
  CHECK_ERROR(cmd_eval(cfg), ErrorCode::Config, "missing_artifact");
}

TEST_CASE("pipeline: artifacts, report, determinism across thread counts") {
  const auto dir = small_fixture("run");
  auto cfg = parse_config(small_config(dir), dir);
  const auto report = cmd_pipeline(cfg);
  for (const char* name : {kScoreFile, kBottleneckFile, kSelectionFile, kSelectedFile, kSelectedTextsFile, kModelFile,
                           kMetricsFile, kExplanationsFile, kReportFile})
    CHECK(fs::exists(cfg.paths.out / name));
  CHECK(report["test_accuracy"].get<double>() >= 0.0);
  CHECK(report["selection"]["pairs"].size() == 4);
  for (const auto& st : report["stages"]) CHECK(st["status"] == "ok");

  const auto sel = json::parse(binary::read_text(cfg.paths.out / kSelectionFile));
  std::set<std::size_t> distinct;
  for (const auto& p : sel["pairs"]) distinct.insert(p["descriptor"].get<std::size_t>());
  CHECK(distinct.size() == 4);

  const auto ex = json::parse(binary::read_text(cfg.paths.out / kExplanationsFile))["explanations"];
  CHECK(ex.size() == 3);
  for (const auto& e : ex) {
    double best = -1;
    std::string text;
    for (const auto& c : e["concepts"])
      if (c["normalized"].get<double>() > best) {
        best = c["normalized"].get<double>();
        text = c["text"];
      }
    CHECK(e["top_concept"]["text"] == text);
  }

  std::map<std::string, std::string> first;
  for (const char* name : {kScoreFile, kBottleneckFile, kSelectionFile, kModelFile, kMetricsFile, kReportFile})
    first[name] = sha256_file(cfg.paths.out / name);
  const auto threads = clear::thread_count();
  clear::set_thread_count(threads == 1 ? 3 : 1);
  cfg.paths.out = dir / "out2";
  cmd_pipeline(cfg);
  clear::set_thread_count(threads);
  for (const auto& [name, digest] : first) CHECK_MESSAGE(sha256_file(cfg.paths.out / name) == digest, name);
}

TEST_CASE("pipeline: baselines and regularizer none skip the score stage") {
  const auto dir = small_fixture("baselines");
  auto c = small_config(dir);
  c["approx"]["regularizer"] = "none";
  for (const char* m : {"nn", "random"}) {
    c["selection"]["method"] = m;
    c["paths"]["out"] = (dir / m).string();
    const auto cfg = parse_config(c, dir);
    const auto report = cmd_pipeline(cfg);
    CHECK(report["stages"][0]["stage"] == "train-score");
    CHECK(report["stages"][0]["status"] == "skipped");
    CHECK_FALSE(fs::exists(cfg.paths.out / kScoreFile));
    CHECK(report["selection"]["method"] == m);
  }
}

TEST_CASE("pipeline: infeasible k and corrupted embeddings") {
  const auto dir = small_fixture("fail");
  auto c = small_config(dir);
  c["k"] = 16;
  c["approx"]["regularizer"] = "euclidean";
  try {
    cmd_pipeline(parse_config(c, dir));
    FAIL("expected failure");
  } catch (const StageError& e) {
    CHECK(e.code() == ErrorCode::Infeasible);
    CHECK(e.exit_code() == 5);
    CHECK(e.stage() == "select");
  }
  const auto report = json::parse(binary::read_text(dir / "out" / kReportFile));
  CHECK(report["failed_stage"] == "select");

  auto bytes = binary::read_file(dir / "images.cleb");
  bytes.resize(bytes.size() - 3);
  binary::write_file(dir / "images.cleb", bytes);
  c = small_config(dir);
  try {
    cmd_pipeline(parse_config(c, dir));
    FAIL("expected failure");
  } catch (const StageError& e) {
    CHECK(e.code() == ErrorCode::Data);
    CHECK(e.exit_code() == 3);
  }
  const auto r2 = json::parse(binary::read_text(dir / "out" / kReportFile));
  CHECK(r2.contains("failed_stage"));
  const auto err = error_json(Error(ErrorCode::Data, "truncated", "x"), "learn");
  CHECK(err["error"]["stage"] == "learn");
  CHECK(err["error"]["exit_code"] == 3);
}

TEST_CASE("cli: exit codes") {
  const auto dir = small_fixture("cli");
  auto c = small_config(dir);
  c["approx"]["regularizer"] = "euclidean";
  write_json(dir / "ok.json", c);
  CHECK(run_cli("pipeline --config " + (dir / "ok.json").string()) == 0);
  CHECK(run_cli("eval --config " + (dir / "ok.json").string()) == 0);
  CHECK(run_cli("pipeline --config " + (dir / "ok.json").string() + " --k 99") == 5);
  CHECK(run_cli("pipeline --config " + (dir / "missing.json").string()) == 2);
  CHECK(run_cli("pipeline --bogus") == 2);
  auto bad = c;
  bad["approx"]["regularizer"] = "ridge";
  write_json(dir / "bad.json", bad);
  CHECK(run_cli("learn --config " + (dir / "bad.json").string()) == 2);
  binary::write_text(dir / "descriptors.cleb", "CLEBgarbage");
  CHECK(run_cli("select --config " + (dir / "ok.json").string()) == 3);
  CHECK(run_cli("make-fixture --out " + (dir / "fx").string() + " --seed 3") == 0);
  CHECK(fs::exists(dir / "fx" / "manifest.json"));
  CHECK(fs::exists(dir / "fx" / "config.json"));
}

TEST_CASE("profiles: every bundled profile extends into a valid config") {
  const auto dir = small_fixture("profiles");
  std::size_t seen = 0;
  for (const auto& entry : fs::directory_iterator(CLEAR_PROFILE_DIR)) {
    write_json(dir / "run.json", {{"extends", entry.path().string()}, {"paths", {{"manifest", "manifest.json"}}}});
    const auto cfg = load_config(dir / "run.json");
    cfg.validate();
    CHECK(cfg.score.hidden == 1024);
    CHECK(cfg.approx.regularizer == bottleneck::Regularizer::ScoreMatching);
    ++seen;
  }
  CHECK(seen == 5);
  const auto cub = load_config(fs::path(CLEAR_PROFILE_DIR) / "cub.json");
  CHECK(cub.approx.langevin.steps == 10);
  CHECK(cub.approx.batch == 32);
  CHECK(cub.head.epochs == 8000);
}
