// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include "clear/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "clear/binary.hpp"
#include "clear/hash.hpp"
#include "clear/io.hpp"
#include "clear/selection.hpp"

namespace clear::pipeline {
namespace {

using json = nlohmann::json;

[[noreturn]] void config_fail(const std::string& msg) { fail(ErrorCode::Config, "invalid_config", msg); }

// Rejects unknown keys so that typos do not silently fall back to defaults.
void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) config_fail(where + ": expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!keys.count(key)) config_fail(where + ": unknown key '" + key + "'");
  }
}

void read_uint(const json& obj, const char* key, std::size_t& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) config_fail(where + "." + key + ": expected a non-negative integer");
  out = v.get<std::size_t>();
}

void read_u64(const json& obj, const char* key, std::uint64_t& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    config_fail(where + "." + key + ": expected a non-negative integer");
  out = v.get<std::uint64_t>();
}

void read_double(const json& obj, const char* key, double& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number()) config_fail(where + "." + key + ": expected a number");
  out = v.get<double>();
}

void read_string(const json& obj, const char* key, std::string& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_string()) config_fail(where + "." + key + ": expected a string");
  out = v.get<std::string>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

json load_json_file(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::Config, "missing_path", "config not found: " + path.string());
  try {
    return json::parse(binary::read_text(path));
  } catch (const json::parse_error& e) {
    config_fail(path.string() + ": " + e.what());
  }
}

// Resolves "extends" chains. Paths inside each file are made absolute
// before merging, so they stay relative to the file that declared them.
json flatten(json doc, const fs::path& base_dir, int depth) {
  if (depth > 16) config_fail("extends: chain too deep");
  if (!doc.is_object()) config_fail("config: expected an object");
  if (doc.contains("paths")) {
    auto& paths = doc["paths"];
    if (!paths.is_object()) config_fail("paths: expected an object");
    for (auto& [key, v] : paths.items()) {
      if (v.is_string()) v = resolve(base_dir, v.get<std::string>()).string();
    }
  }
  if (!doc.contains("extends")) return doc;
  const auto& ext = doc.at("extends");
  if (!ext.is_string()) config_fail("extends: expected a string");
  const fs::path parent_path = resolve(base_dir, ext.get<std::string>());
  json merged = flatten(load_json_file(parent_path), parent_path.parent_path(), depth + 1);
  doc.erase("extends");
  merged.merge_patch(doc);
  return merged;
}

fs::path stage_input(const PipelineConfig& cfg, const char* name) {
  const fs::path p = cfg.paths.out / name;
  if (!fs::exists(p)) {
    fail(ErrorCode::Config, "missing_artifact", std::string("upstream artifact not found: ") + p.string());
  }
  return p;
}

io::Corpus load_inputs(const PipelineConfig& cfg) {
  return io::load_corpus(cfg.paths.manifest, cfg.paths.images, cfg.paths.descriptors);
}

fs::path images_path(const PipelineConfig& cfg, const io::DatasetManifest& m) {
  return cfg.paths.images ? *cfg.paths.images : m.image_embeddings.value_or(fs::path());
}

fs::path descriptors_path(const PipelineConfig& cfg, const io::DatasetManifest& m) {
  return cfg.paths.descriptors ? *cfg.paths.descriptors : m.descriptor_embeddings.value_or(fs::path());
}

json score_section(const score::SsmConfig& s) {
  return {{"epochs", s.epochs},
          {"lr", s.lr},
          {"image_batch", s.image_batch},
          {"descriptor_batch", s.descriptor_batch},
          {"slices", s.slices},
          {"slice", score::to_string(s.slice)},
          {"hidden", s.hidden},
          {"activation", nn::to_string(s.activation)}};
}

json approx_section(const bottleneck::ApproxTrainConfig& a) {
  return {{"lambda", a.lambda},
          {"epsilon", a.langevin.eps},
          {"steps", a.langevin.steps},
          {"regularizer", bottleneck::to_string(a.regularizer)},
          {"lr", a.lr},
          {"batch", a.batch},
          {"epochs", a.epochs}};
}

json head_section(const cbm::HeadConfig& h) {
  return {{"epochs", h.epochs}, {"lr", h.lr}, {"batch", h.batch}};
}

void ensure_out(const PipelineConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.paths.out, ec);
  if (ec) fail(ErrorCode::Config, "missing_path", "cannot create output directory " + cfg.paths.out.string());
}

json read_json_artifact(const fs::path& p) {
  try {
    return json::parse(binary::read_text(p));
  } catch (const json::exception& e) {
    fail(ErrorCode::Data, "schema", p.string() + ": " + e.what());
  }
}

struct SelectedBundle {
  Matrix concepts;
  std::vector<std::string> texts;
};

SelectedBundle read_selected(const PipelineConfig& cfg) {
  const auto set = io::read_embeddings(stage_input(cfg, kSelectedFile));
  const json texts = read_json_artifact(stage_input(cfg, kSelectedTextsFile));
  SelectedBundle b{set.to_matrix(), {}};
  try {
    b.texts = texts.at("texts").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Data, "schema", std::string(kSelectedTextsFile) + ": " + e.what());
  }
  if (b.texts.size() != b.concepts.rows) {
    fail(ErrorCode::Data, "shape_mismatch", "selected texts do not match selected embeddings");
  }
  return b;
}

std::vector<std::size_t> split_rows(const io::DatasetManifest& m, io::Split s) { return m.split_indices(s); }

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::Hungarian: return "hungarian";
    case Method::NearestNeighbor: return "nn";
    case Method::Random: return "random";
  }
  return "hungarian";
}

Method method_from_string(const std::string& name) {
  if (name == "hungarian") return Method::Hungarian;
  if (name == "nn") return Method::NearestNeighbor;
  if (name == "random") return Method::Random;
  config_fail("unknown selection method '" + name + "'");
}

void PipelineConfig::sync() {
  score.seed = seed;
  approx.seed = seed;
  approx.langevin.seed = seed;
  approx.k = k;
  head.seed = seed;
}

void PipelineConfig::validate() const {
  if (k < 1) config_fail("k must be >= 1");
  if (selection.m0 < 1) config_fail("selection.m0 must be >= 1");
  if (approx.k != k) config_fail("approx.k differs from k; call sync()");
  score.validate();
  approx.validate();
  head.validate();
  auto require = [](const fs::path& p, const char* what) {
    if (p.empty() || !fs::exists(p)) {
      fail(ErrorCode::Config, "missing_path", std::string(what) + " not found: '" + p.string() + "'");
    }
  };
  require(paths.manifest, "manifest");
  if (paths.images && paths.descriptors) {
    require(*paths.images, "image embeddings");
    require(*paths.descriptors, "descriptor embeddings");
    return;
  }
  const auto m = io::load_manifest(paths.manifest);
  require(paths.images ? *paths.images : m.image_embeddings.value_or(fs::path()), "image embeddings");
  require(paths.descriptors ? *paths.descriptors : m.descriptor_embeddings.value_or(fs::path()),
          "descriptor embeddings");
}

PipelineConfig parse_config(const json& raw, const fs::path& base_dir) {
  const json doc = flatten(raw, base_dir, 0);
  check_keys(doc, "config", {"name", "description", "paths", "score", "approx", "selection", "head", "explain", "k", "seed"});

  PipelineConfig cfg;
  read_string(doc, "name", cfg.name, "config");
  read_uint(doc, "k", cfg.k, "config");
  read_u64(doc, "seed", cfg.seed, "config");

  if (doc.contains("paths")) {
    const auto& p = doc.at("paths");
    check_keys(p, "paths", {"manifest", "images", "descriptors", "out"});
    std::string s;
    if (p.contains("manifest")) { read_string(p, "manifest", s, "paths"); cfg.paths.manifest = s; }
    if (p.contains("images")) { read_string(p, "images", s, "paths"); cfg.paths.images = fs::path(s); }
    if (p.contains("descriptors")) { read_string(p, "descriptors", s, "paths"); cfg.paths.descriptors = fs::path(s); }
    if (p.contains("out")) { read_string(p, "out", s, "paths"); cfg.paths.out = s; }
    else cfg.paths.out = resolve(base_dir, "out");
  } else {
    cfg.paths.out = resolve(base_dir, "out");
  }

  if (doc.contains("score")) {
    const auto& s = doc.at("score");
    check_keys(s, "score", {"epochs", "lr", "image_batch", "descriptor_batch", "slices", "slice", "hidden", "activation"});
    read_uint(s, "epochs", cfg.score.epochs, "score");
    read_double(s, "lr", cfg.score.lr, "score");
    read_uint(s, "image_batch", cfg.score.image_batch, "score");
    read_uint(s, "descriptor_batch", cfg.score.descriptor_batch, "score");
    read_uint(s, "slices", cfg.score.slices, "score");
    read_uint(s, "hidden", cfg.score.hidden, "score");
    std::string name;
    if (s.contains("slice")) {
      read_string(s, "slice", name, "score");
      cfg.score.slice = score::slice_distribution_from_string(name);
    }
    if (s.contains("activation")) {
      read_string(s, "activation", name, "score");
      cfg.score.activation = nn::activation_from_string(name);
    }
  }

  if (doc.contains("approx")) {
    const auto& a = doc.at("approx");
    check_keys(a, "approx", {"lambda", "epsilon", "steps", "regularizer", "lr", "batch", "epochs"});
    read_double(a, "lambda", cfg.approx.lambda, "approx");
    read_double(a, "epsilon", cfg.approx.langevin.eps, "approx");
    read_uint(a, "steps", cfg.approx.langevin.steps, "approx");
    read_double(a, "lr", cfg.approx.lr, "approx");
    read_uint(a, "batch", cfg.approx.batch, "approx");
    read_uint(a, "epochs", cfg.approx.epochs, "approx");
    if (a.contains("regularizer")) {
      std::string name;
      read_string(a, "regularizer", name, "approx");
      cfg.approx.regularizer = bottleneck::regularizer_from_string(name);
    }
  }

  if (doc.contains("selection")) {
    const auto& s = doc.at("selection");
    check_keys(s, "selection", {"m0", "method"});
    read_uint(s, "m0", cfg.selection.m0, "selection");
    if (s.contains("method")) {
      std::string name;
      read_string(s, "method", name, "selection");
      cfg.selection.method = method_from_string(name);
    }
  }

  if (doc.contains("head")) {
    const auto& h = doc.at("head");
    check_keys(h, "head", {"epochs", "lr", "batch"});
    read_uint(h, "epochs", cfg.head.epochs, "head");
    read_double(h, "lr", cfg.head.lr, "head");
    read_uint(h, "batch", cfg.head.batch, "head");
  }

  if (doc.contains("explain")) {
    const auto& e = doc.at("explain");
    check_keys(e, "explain", {"items", "limit"});
    read_uint(e, "limit", cfg.explain.limit, "explain");
    if (e.contains("items")) {
      const auto& items = e.at("items");
      if (!items.is_array()) config_fail("explain.items: expected an array of item ids");
      for (const auto& id : items) {
        if (!id.is_string()) config_fail("explain.items: expected an array of item ids");
        cfg.explain.items.push_back(id.get<std::string>());
      }
    }
  }

  cfg.sync();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  const fs::path abs = fs::absolute(path).lexically_normal();
  return parse_config(load_json_file(abs), abs.parent_path());
}

json config_to_json(const PipelineConfig& cfg) {
  json paths = {{"manifest", cfg.paths.manifest.string()}};
  if (cfg.paths.images) paths["images"] = cfg.paths.images->string();
  if (cfg.paths.descriptors) paths["descriptors"] = cfg.paths.descriptors->string();
  json doc = {{"paths", paths},
              {"k", cfg.k},
              {"seed", cfg.seed},
              {"score", score_section(cfg.score)},
              {"approx", approx_section(cfg.approx)},
              {"selection", {{"m0", cfg.selection.m0}, {"method", to_string(cfg.selection.method)}}},
              {"head", head_section(cfg.head)},
              {"explain", {{"items", cfg.explain.items}, {"limit", cfg.explain.limit}}}};
  if (!cfg.name.empty()) doc["name"] = cfg.name;
  return doc;
}

void apply_overrides(PipelineConfig& cfg, const Overrides& o) {
  if (o.out) cfg.paths.out = fs::absolute(*o.out).lexically_normal();
  if (o.seed) cfg.seed = *o.seed;
  if (o.method) cfg.selection.method = method_from_string(*o.method);
  if (o.k) cfg.k = *o.k;
  cfg.sync();
}

json cmd_train_score(const PipelineConfig& cfg) {
  const auto corpus = load_inputs(cfg);
  ensure_out(cfg);
  auto result = score::train_score(corpus.images, corpus.descriptors, cfg.score);
  const json meta = {{"epochs", cfg.score.epochs},
                     {"final_loss", result.epoch_losses.empty() ? json(nullptr) : json(result.epoch_losses.back())},
                     {"loss_curve", result.epoch_losses},
                     {"seed", cfg.seed},
                     {"config", score_section(cfg.score)}};
  const fs::path out = cfg.paths.out / kScoreFile;
  score::save_score_net(result.net, out, meta.dump());
  return {{"stage", "train-score"}, {"artifact", out.filename().string()}, {"sha256", sha256_file(out)},
          {"loss_curve", result.epoch_losses}};
}

json cmd_learn(const PipelineConfig& cfg) {
  const auto corpus = load_inputs(cfg);
  const std::size_t num_classes = corpus.manifest.classes.size();
  const Matrix images = corpus.images.to_matrix();
  const auto labels = corpus.manifest.labels();
  const auto train = split_rows(corpus.manifest, io::Split::Train);
  const auto val = split_rows(corpus.manifest, io::Split::Val);
  if (train.empty() || val.empty()) fail(ErrorCode::Data, "empty_split", "learn needs non-empty train and val splits");

  // Only the regularizer in use gets its inputs; with the regularizer off
  // the score checkpoint is never read.
  bottleneck::RegularizerInputs inputs;
  std::optional<score::ScoreNet> net;
  Matrix pool;
  std::optional<bottleneck::PoolStats> stats;
  if (!cfg.approx.regularizer_off()) {
    switch (cfg.approx.regularizer) {
      case bottleneck::Regularizer::ScoreMatching:
        net = score::load_score_net(stage_input(cfg, kScoreFile));
        if (net->dim() != images.cols) fail(ErrorCode::Data, "shape_mismatch", "score net dim differs from embeddings");
        inputs.net = &*net;
        break;
      case bottleneck::Regularizer::Euclidean:
        pool = corpus.descriptors.to_matrix();
        inputs.pool = &pool;
        break;
      case bottleneck::Regularizer::Mahalanobis:
        stats = bottleneck::PoolStats::from_pool(corpus.descriptors.to_matrix());
        inputs.stats = &*stats;
        break;
      case bottleneck::Regularizer::None:
        break;
    }
  }
  ensure_out(cfg);
  const bottleneck::LabeledSplits data{&images, labels, train, val, num_classes};
  const auto result = bottleneck::train_approximation(data, inputs, cfg.approx);
  const fs::path out = cfg.paths.out / kBottleneckFile;
  bottleneck::write_params(result.best, out);
  const json sidecar = {{"best_epoch", result.best_epoch},
                        {"best_val_accuracy", result.best_val_accuracy},
                        {"val_curve", result.val_curve},
                        {"train_accuracy_curve", result.train_accuracy_curve},
                        {"loss_curve", result.loss_curve},
                        {"seed", cfg.seed},
                        {"k", cfg.k},
                        {"config", approx_section(cfg.approx)}};
  auto sidecar_path = out;
  sidecar_path.replace_extension(".json");
  binary::write_text(sidecar_path, sidecar.dump(2) + "\n");
  return {{"stage", "learn"},
          {"artifact", out.filename().string()},
          {"sha256", sha256_file(out)},
          {"best_epoch", result.best_epoch},
          {"best_val_accuracy", result.best_val_accuracy},
          {"val_curve", result.val_curve},
          {"loss_curve", result.loss_curve}};
}

json cmd_select(const PipelineConfig& cfg) {
  const auto corpus = load_inputs(cfg);
  const auto params = bottleneck::read_params(stage_input(cfg, kBottleneckFile));
  if (params.dim() != corpus.descriptors.dim) {
    fail(ErrorCode::Data, "shape_mismatch", "bottleneck dim differs from descriptor embeddings");
  }
  const std::size_t k = params.k();
  const std::size_t pool_size = corpus.descriptors.rows;
  if (pool_size < k) {
    fail(ErrorCode::Infeasible, "pool_too_small",
         "pool has " + std::to_string(pool_size) + " descriptors, need k = " + std::to_string(k));
  }
  const Matrix pool = corpus.descriptors.to_matrix();
  const auto full = selection::similarity_matrix(params.concepts, pool);

  json report = {{"method", to_string(cfg.selection.method)}, {"k", k}, {"pool_size", pool_size}};
  selection::Assignment chosen;
  std::vector<std::size_t> ids;
  switch (cfg.selection.method) {
    case Method::Hungarian: {
      const auto filtered = selection::top_m_filter(full, k, cfg.selection.m0);
      report["m"] = filtered.m;
      report["top_des"] = filtered.filtered.col_ids.size();
      report["filter_skipped"] = filtered.skipped;
      chosen = selection::assign(filtered.filtered);
      for (const auto& [r, c] : chosen.pairs) ids.push_back(c);
      break;
    }
    case Method::NearestNeighbor:
      ids = selection::select_nn(params.concepts, pool);
      chosen = selection::assignment_from_ids(full, ids);
      break;
    case Method::Random:
      ids = selection::select_random(pool_size, k, cfg.seed);
      chosen = selection::assignment_from_ids(full, ids);
      break;
  }
  const auto bundle = selection::build_selected(corpus.descriptors, corpus.manifest, ids);

  json pairs = json::array();
  for (std::size_t i = 0; i < chosen.pairs.size(); ++i) {
    pairs.push_back({{"concept", chosen.pairs[i].first},
                     {"descriptor", chosen.pairs[i].second},
                     {"similarity", chosen.similarities[i]},
                     {"text", bundle.texts[i]}});
  }
  report["pairs"] = pairs;
  report["total_similarity"] = chosen.total_similarity;
  report["deduplicated_total"] = selection::deduplicated_total(full, ids);
  report["distinct"] = std::set<std::size_t>(ids.begin(), ids.end()).size();

  ensure_out(cfg);
  binary::write_text(cfg.paths.out / kSelectionFile, report.dump(2) + "\n");
  io::write_embeddings(io::EmbeddingSet::from_matrix(bundle.concepts), cfg.paths.out / kSelectedFile);
  const json texts = {{"texts", bundle.texts}, {"pool_ids", bundle.pool_ids}};
  binary::write_text(cfg.paths.out / kSelectedTextsFile, texts.dump(2) + "\n");

  return {{"stage", "select"},
          {"artifact", kSelectionFile},
          {"sha256", sha256_file(cfg.paths.out / kSelectionFile)},
          {"selection", report}};
}

json cmd_train_head(const PipelineConfig& cfg) {
  const auto corpus = load_inputs(cfg);
  const auto selected = read_selected(cfg);
  if (selected.concepts.cols != corpus.images.dim) {
    fail(ErrorCode::Data, "shape_mismatch", "selected concepts dim differs from image embeddings");
  }
  const Matrix images = corpus.images.to_matrix();
  const auto labels = corpus.manifest.labels();
  const auto train = split_rows(corpus.manifest, io::Split::Train);
  const auto val = split_rows(corpus.manifest, io::Split::Val);
  const cbm::HeadData data{&images, labels, train, val};
  const auto result = cbm::train_head(selected.concepts, selected.texts, corpus.manifest.classes, data, cfg.head);
  ensure_out(cfg);
  const fs::path out = cfg.paths.out / kModelFile;
  const json meta = {{"best_epoch", result.best_epoch},
                     {"best_val_accuracy", result.best_val_accuracy},
                     {"val_curve", result.val_curve},
                     {"loss_curve", result.loss_curve},
                     {"seed", cfg.seed},
                     {"config", head_section(cfg.head)}};
  cbm::write_model(result.model, out, meta.dump());
  return {{"stage", "train-head"},
          {"artifact", out.filename().string()},
          {"sha256", sha256_file(out)},
          {"best_epoch", result.best_epoch},
          {"best_val_accuracy", result.best_val_accuracy},
          {"val_curve", result.val_curve}};
}

json cmd_eval(const PipelineConfig& cfg) {
  const auto corpus = load_inputs(cfg);
  const auto model = cbm::read_model(stage_input(cfg, kModelFile));
  const Matrix images = corpus.images.to_matrix();
  const auto labels = corpus.manifest.labels();
  const auto test = split_rows(corpus.manifest, io::Split::Test);
  const auto ev = cbm::evaluate(model, images, labels, test);
  json per_class = json::object();
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    per_class[model.classes[c]] = {{"accuracy", ev.per_class_accuracy[c]}, {"total", ev.per_class_total[c]}};
  }
  const json metrics = {{"accuracy", ev.accuracy}, {"correct", ev.correct}, {"total", ev.total}, {"per_class", per_class}};
  ensure_out(cfg);
  binary::write_text(cfg.paths.out / kMetricsFile, metrics.dump(2) + "\n");
  return metrics;
}

json cmd_explain(const PipelineConfig& cfg) {
  const auto corpus = load_inputs(cfg);
  const auto model = cbm::read_model(stage_input(cfg, kModelFile));
  const auto& m = corpus.manifest;

  std::vector<std::size_t> rows;
  if (cfg.explain.items.empty()) {
    const auto test = split_rows(m, io::Split::Test);
    rows.assign(test.begin(), test.begin() + static_cast<std::ptrdiff_t>(std::min(cfg.explain.limit, test.size())));
  } else {
    for (const auto& id : cfg.explain.items) {
      const auto r = m.find_item(id);
      if (!r) fail(ErrorCode::Data, "dangling_index", "explain: unknown item id '" + id + "'");
      rows.push_back(*r);
    }
  }

  json reports = json::array();
  Vector x(corpus.images.dim);
  for (const std::size_t r : rows) {
    const auto row = corpus.images.row(r);
    std::copy(row.begin(), row.end(), x.begin());
    const auto e = cbm::explain(model, x);
    json concepts = json::array();
    for (std::size_t i = 0; i < model.k(); ++i) {
      concepts.push_back({{"text", model.texts[i]}, {"raw", e.raw_scores[i]}, {"normalized", e.normalized_scores[i]}});
    }
    reports.push_back({{"id", m.items[r].id},
                       {"predicted_class", model.classes[e.predicted_class]},
                       {"true_class", m.classes[m.items[r].label]},
                       {"concepts", concepts},
                       {"top_concept", {{"index", e.top_concept}, {"text", e.top_text}, {"normalized", e.top_normalized}}}});
  }
  const json doc = {{"explanations", reports}};
  ensure_out(cfg);
  binary::write_text(cfg.paths.out / kExplanationsFile, doc.dump(2) + "\n");
  return {{"stage", "explain"},
          {"artifact", kExplanationsFile},
          {"sha256", sha256_file(cfg.paths.out / kExplanationsFile)},
          {"count", rows.size()}};
}

json cmd_pipeline(const PipelineConfig& cfg) {
  using Clock = std::chrono::steady_clock;
  ensure_out(cfg);

  json report = {{"config", config_to_json(cfg)}};
  json inputs = json::object();
  json stages = json::array();
  json timings = json::object();

  struct Stage {
    const char* name;
    json (*run)(const PipelineConfig&);
  };
  const Stage order[] = {{"train-score", cmd_train_score}, {"learn", cmd_learn},           {"select", cmd_select},
                         {"train-head", cmd_train_head},   {"eval", cmd_eval},             {"explain", cmd_explain}};

  auto write_outputs = [&] {
    report["inputs"] = inputs;
    report["stages"] = stages;
    json artifacts = json::object();
    for (const char* name : {kScoreFile, "score.json", kBottleneckFile, "bottleneck.json", kSelectionFile, kSelectedFile,
                             kSelectedTextsFile, kModelFile, "model.json", kMetricsFile, kExplanationsFile}) {
      const fs::path p = cfg.paths.out / name;
      if (fs::exists(p)) artifacts[name] = "sha256:" + sha256_file(p);
    }
    report["artifacts"] = artifacts;
    binary::write_text(cfg.paths.out / kReportFile, report.dump(2) + "\n");
    binary::write_text(cfg.paths.out / kTimingsFile, json{{"seconds", timings}}.dump(2) + "\n");
  };

  {
    const auto m = io::load_manifest(cfg.paths.manifest);
    inputs["manifest"] = "sha256:" + sha256_file(cfg.paths.manifest);
    inputs["images"] = "sha256:" + sha256_file(images_path(cfg, m));
    inputs["descriptors"] = "sha256:" + sha256_file(descriptors_path(cfg, m));
  }
  const bool skip_score = cfg.approx.regularizer != bottleneck::Regularizer::ScoreMatching || cfg.approx.regularizer_off();
  for (const auto& stage : order) {
    const auto start = Clock::now();
    json summary;
    try {
      if (std::string(stage.name) == "train-score" && skip_score) {
        stages.push_back({{"stage", stage.name}, {"status", "skipped"}});
        continue;
      }
      summary = stage.run(cfg);
    } catch (const Error& e) {
      timings[stage.name] = std::chrono::duration<double>(Clock::now() - start).count();
      stages.push_back({{"stage", stage.name}, {"status", "failed"}, {"error", error_json(e)["error"]}});
      report["failed_stage"] = stage.name;
      write_outputs();
      throw StageError(e, stage.name);
    }
    timings[stage.name] = std::chrono::duration<double>(Clock::now() - start).count();
    const std::string name = stage.name;
    if (name == "train-score") report["score_losses"] = summary["loss_curve"];
    if (name == "learn") {
      report["approx_val_curve"] = summary["val_curve"];
      report["approx_losses"] = summary["loss_curve"];
    }
    if (name == "select") report["selection"] = summary["selection"];
    if (name == "train-head") report["head_val_curve"] = summary["val_curve"];
    if (name == "eval") report["test_accuracy"] = summary["accuracy"];
    stages.push_back({{"stage", name}, {"status", "ok"}});
  }
  write_outputs();
  return report;
}

json fixture_config(const fs::path& fixture_dir) {
  return {{"name", "synthetic-fixture"},
          {"paths", {{"manifest", (fixture_dir / "manifest.json").string()}, {"out", (fixture_dir / "out").string()}}},
          {"k", 10},
          {"seed", 0},
          {"score", {{"epochs", 300}, {"lr", 1e-3}, {"image_batch", 256}, {"descriptor_batch", 32}, {"hidden", 128}}},
          {"approx",
           {{"lambda", 1.0}, {"epsilon", 0.01}, {"steps", 5}, {"regularizer", "sm"}, {"lr", 0.01}, {"batch", 256}, {"epochs", 100}}},
          {"selection", {{"m0", 5}, {"method", "hungarian"}}},
          {"head", {{"epochs", 200}, {"lr", 0.01}, {"batch", 256}}},
          {"explain", {{"limit", 10}}}};
}

json error_json(const Error& e, const std::string& stage) {
  json err = {{"code", to_string(e.code())}, {"kind", e.kind()}, {"message", e.what()}, {"exit_code", e.exit_code()}};
  if (!stage.empty()) err["stage"] = stage;
  return {{"error", err}};
}

}  // namespace clear::pipeline
