// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

// clear: command-line driver for the concept-bottleneck pipeline.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "clear/binary.hpp"
#include "clear/pipeline.hpp"
#include "clear/synthetic.hpp"

namespace {

using clear::pipeline::PipelineConfig;
using json = nlohmann::json;

int report_error(const json& err) {
  std::cerr << err.dump() << std::endl;
  return err["error"]["exit_code"].get<int>();
}

int run_fixture(const std::string& out, std::uint64_t seed, double image_noise, double mean_cosine) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::absolute(out).lexically_normal();
  clear::synthetic::FixtureSpec spec;
  spec.seed = seed;
  spec.image_noise = image_noise;
  spec.mean_cosine = mean_cosine;
  const auto fx = clear::synthetic::make_fixture(spec);
  clear::synthetic::write_fixture(fx, dir);
  clear::binary::write_text(dir / "config.json", clear::pipeline::fixture_config(dir).dump(2) + "\n");
  std::cout << json{{"fixture", dir.string()}, {"config", (dir / "config.json").string()}}.dump() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clear: concept bottleneck training, selection and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  clear::pipeline::Overrides overrides;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string method;
  std::size_t k = 0;

  const char* stages[] = {"train-score", "learn", "select", "train-head", "eval", "explain", "pipeline"};
  const char* help[] = {"train the score network",
                        "learn the approximate bottleneck",
                        "select descriptors for the learned concepts",
                        "train the head on the selected bottleneck",
                        "evaluate on the test split",
                        "explain predictions for listed items",
                        "run every stage and write report.json"};
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < std::size(stages); ++i) {
    auto* sub = app.add_subcommand(stages[i], help[i]);
    sub->add_option("--config", config_path, "pipeline config JSON")->required();
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--seed", seed, "seed (overrides config)");
    sub->add_option("--method", method, "selection method: hungarian, nn or random");
    sub->add_option("--k", k, "bottleneck size");
    subs.push_back(sub);
  }
  auto* fixture = app.add_subcommand("make-fixture", "write the synthetic fixture and a config for it");
  std::string fixture_out = "fixture";
  std::uint64_t fixture_seed = 0;
  fixture->add_option("--out", fixture_out, "fixture directory");
  fixture->add_option("--seed", fixture_seed, "fixture seed");
  double fixture_noise = clear::synthetic::FixtureSpec{}.image_noise;
  fixture->add_option("--image-noise", fixture_noise, "norm of the noise added to class means");
  double fixture_cosine = clear::synthetic::FixtureSpec{}.mean_cosine;
  fixture->add_option("--mean-cosine", fixture_cosine, "pairwise cosine of the class means");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error({{"error", {{"code", "config_error"}, {"kind", "usage"}, {"message", e.what()}, {"exit_code", 2}}}});
  }

  std::string stage;
  try {
    if (fixture->parsed()) return run_fixture(fixture_out, fixture_seed, fixture_noise, fixture_cosine);

    CLI::App* chosen = nullptr;
    for (auto* sub : subs) {
      if (sub->parsed()) chosen = sub;
    }
    stage = chosen->get_name();
    if (chosen->count("--out")) overrides.out = out_dir;
    if (chosen->count("--seed")) overrides.seed = seed;
    if (chosen->count("--method")) overrides.method = method;
    if (chosen->count("--k")) overrides.k = k;

    PipelineConfig cfg = clear::pipeline::load_config(config_path);
    clear::pipeline::apply_overrides(cfg, overrides);
    cfg.validate();

    json result;
    if (stage == "train-score") result = clear::pipeline::cmd_train_score(cfg);
    else if (stage == "learn") result = clear::pipeline::cmd_learn(cfg);
    else if (stage == "select") result = clear::pipeline::cmd_select(cfg);
    else if (stage == "train-head") result = clear::pipeline::cmd_train_head(cfg);
    else if (stage == "eval") result = clear::pipeline::cmd_eval(cfg);
    else if (stage == "explain") result = clear::pipeline::cmd_explain(cfg);
    else {
      const json report = clear::pipeline::cmd_pipeline(cfg);
      result = {{"stage", "pipeline"},
                {"report", (cfg.paths.out / clear::pipeline::kReportFile).string()},
                {"test_accuracy", report["test_accuracy"]}};
    }
    std::cout << result.dump() << std::endl;
    return 0;
  } catch (const clear::pipeline::StageError& e) {
    return report_error(clear::pipeline::error_json(e, e.stage()));
  } catch (const clear::Error& e) {
    return report_error(clear::pipeline::error_json(e, stage));
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error(clear::pipeline::error_json(clear::Error(clear::ErrorCode::Data, "io_error", e.what()), stage));
  }
}
