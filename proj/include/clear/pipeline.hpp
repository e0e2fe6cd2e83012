// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clear/bottleneck.hpp"
#include "clear/cbm.hpp"
#include "clear/error.hpp"
#include "clear/score.hpp"

// Stage drivers behind the command-line tool. Every stage reads its inputs
// from the configured paths and the output directory, and writes its
// artifacts back into the output directory.
namespace clear::pipeline {

namespace fs = std::filesystem;

enum class Method { Hungarian, NearestNeighbor, Random };
const char* to_string(Method m);
Method method_from_string(const std::string& name);

struct Paths {
  fs::path manifest;
  std::optional<fs::path> images;       // defaults to the manifest's reference
  std::optional<fs::path> descriptors;  // likewise
  fs::path out = "out";
};

struct SelectionConfig {
  std::size_t m0 = 5;
  Method method = Method::Hungarian;
};

struct ExplainConfig {
  std::vector<std::string> items;  // empty: the first `limit` test items
  std::size_t limit = 10;
};

struct PipelineConfig {
  std::string name;
  Paths paths;
  score::SsmConfig score;
  bottleneck::ApproxTrainConfig approx;
  SelectionConfig selection;
  cbm::HeadConfig head;
  ExplainConfig explain;
  std::size_t k = 8;
  std::uint64_t seed = 0;

  // Pushes k and seed into the stage sections.
  void sync();
  // Config errors for bad values or missing input files.
  void validate() const;
};

// Relative paths resolve against `base_dir`. An "extends" key names another
// config (relative to the including file) that this one is merged over.
PipelineConfig parse_config(const nlohmann::json& doc, const fs::path& base_dir);
PipelineConfig load_config(const fs::path& path);
// Resolved config, output directory omitted. Loading it reproduces the run.
nlohmann::json config_to_json(const PipelineConfig& cfg);

struct Overrides {
  std::optional<fs::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::size_t> k;
};
void apply_overrides(PipelineConfig& cfg, const Overrides& o);

// Artifact names inside the output directory.
inline constexpr const char* kScoreFile = "score.clnn";
inline constexpr const char* kBottleneckFile = "bottleneck.clbn";
inline constexpr const char* kSelectionFile = "selection.json";
inline constexpr const char* kSelectedFile = "selected.cleb";
inline constexpr const char* kSelectedTextsFile = "selected_texts.json";
inline constexpr const char* kModelFile = "model.clcm";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kExplanationsFile = "explanations.json";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kTimingsFile = "timings.json";

// Each stage returns a JSON summary that the tool prints on stdout.
nlohmann::json cmd_train_score(const PipelineConfig& cfg);
nlohmann::json cmd_learn(const PipelineConfig& cfg);
nlohmann::json cmd_select(const PipelineConfig& cfg);
nlohmann::json cmd_train_head(const PipelineConfig& cfg);
nlohmann::json cmd_eval(const PipelineConfig& cfg);
nlohmann::json cmd_explain(const PipelineConfig& cfg);

// Runs every stage in order and writes report.json. A failing stage is
// recorded in the report and rethrown as StageError.
nlohmann::json cmd_pipeline(const PipelineConfig& cfg);

class StageError : public Error {
 public:
  StageError(const Error& e, std::string stage) : Error(e), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// A small, fast config for the synthetic fixture in `fixture_dir`.
nlohmann::json fixture_config(const fs::path& fixture_dir);

// {"error": {code, kind, message, exit_code[, stage]}}
nlohmann::json error_json(const Error& e, const std::string& stage = {});

}  // namespace clear::pipeline
