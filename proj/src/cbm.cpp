// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include "clear/cbm.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "clear/binary.hpp"
#include "clear/error.hpp"
#include "clear/nn.hpp"
#include "clear/rng.hpp"
#include "clear/simd.hpp"

namespace clear::cbm {

using nlohmann::json;

Vector CbmModel::concept_scores(std::span<const double> x) const {
  if (x.size() != dim()) fail(ErrorCode::Data, "dim_mismatch", "cbm: input dimension mismatch");
  Vector s(k());
  for (std::size_t i = 0; i < k(); ++i) s[i] = dot(concepts.row(i), x);
  return s;
}

Vector CbmModel::head_logits(std::span<const double> scores) const {
  Vector z(num_classes());
  for (std::size_t c = 0; c < num_classes(); ++c) z[c] = dot(head_weight.row(c), scores) + head_bias[c];
  return z;
}

void CbmModel::validate() const {
  if (texts.size() != k()) fail(ErrorCode::Data, "schema", "cbm: text count differs from concept count");
  if (head_weight.cols != k() || head_bias.size() != head_weight.rows) {
    fail(ErrorCode::Data, "schema", "cbm: head shape does not match the bottleneck");
  }
  if (!classes.empty() && classes.size() != num_classes()) {
    fail(ErrorCode::Data, "schema", "cbm: class name count differs from head outputs");
  }
  for (std::size_t i = 0; i < k(); ++i) {
    if (std::abs(norm(concepts.row(i)) - 1.0) > 1e-4) {
      fail(ErrorCode::Data, "schema", "cbm: concept " + std::to_string(i) + " is not unit-norm");
    }
  }
}

void HeadConfig::validate() const {
  if (batch == 0) fail(ErrorCode::Config, "invalid_config", "head: batch must be >= 1");
  if (!(lr > 0.0)) fail(ErrorCode::Config, "invalid_config", "head: lr must be > 0");
}

namespace {

double score_accuracy(const CbmModel& model, const Matrix& scores, std::span<const std::size_t> labels,
                      std::span<const std::size_t> rows) {
  std::size_t correct = 0;
  for (std::size_t r : rows)
    if (predict_from_scores(model, scores.row(r)) == labels[r]) ++correct;
  return rows.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(rows.size());
}

}  // namespace

TrainHeadResult train_head(const Matrix& concepts, const std::vector<std::string>& texts,
                           const std::vector<std::string>& classes, const HeadData& data, const HeadConfig& cfg,
                           const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.images == nullptr) fail(ErrorCode::Config, "missing_input", "head: no images");
  if (data.train.empty()) fail(ErrorCode::Data, "empty_split", "head: train split is empty");
  if (data.val.empty()) fail(ErrorCode::Data, "empty_split", "head: validation split is empty");
  if (data.images->cols != concepts.cols) fail(ErrorCode::Data, "dim_mismatch", "head: image/concept widths differ");
  const std::size_t k = concepts.rows;
  const std::size_t num_classes = classes.size();
  if (num_classes == 0) fail(ErrorCode::Data, "schema", "head: no classes");

  CbmModel model{concepts, texts, Matrix(num_classes, k), Vector(num_classes, 0.0), classes};
  model.validate();
  Rng rng(derive_seed(cfg.seed, 30));
  const double bound = 1.0 / std::sqrt(static_cast<double>(k));
  for (double& w : model.head_weight.data) w = bound * (2.0 * rng.uniform() - 1.0);
  for (double& b : model.head_bias) b = bound * (2.0 * rng.uniform() - 1.0);

  // g is frozen, so its outputs are computed once.
  const Matrix scores = matmul_nt(*data.images, concepts);

  TrainHeadResult result{model, 0, score_accuracy(model, scores, data.labels, data.val), {}, {}};
  nn::AdamState adam(model.head_weight.size() + model.head_bias.size(), nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Rng order_rng(derive_seed(cfg.seed, 31));
  std::vector<std::size_t> order(data.train.begin(), data.train.end());
  bool have_epoch = false;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t n = std::min(cfg.batch, order.size() - start);
      const double inv_n = 1.0 / static_cast<double>(n);
      Matrix grad_w(num_classes, k);
      Vector grad_b(num_classes, 0.0);
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = order[start + i];
        const auto s = scores.row(r);
        const auto ce = nn::softmax_cross_entropy(model.head_logits(s), data.labels[r]);
        loss += ce.loss;
        for (std::size_t c = 0; c < num_classes; ++c) {
          const double g = inv_n * ce.grad_logits[c];
          grad_b[c] += g;
          simd::axpy(g, s.data(), grad_w.row(c).data(), k);
        }
      }
      nn::adam_step({std::span<double>(model.head_weight.data), std::span<double>(model.head_bias)},
                    {std::span<const double>(grad_w.data), std::span<const double>(grad_b)}, adam);
      loss_sum += loss * inv_n;
      ++batches;
    }
    const double epoch_loss = loss_sum / static_cast<double>(batches);
    if (!std::isfinite(epoch_loss)) fail(ErrorCode::Divergence, "non_finite", "head: loss diverged");
    const double val_acc = score_accuracy(model, scores, data.labels, data.val);
    result.loss_curve.push_back(epoch_loss);
    result.val_curve.push_back(val_acc);
    if (!have_epoch || val_acc > result.best_val_accuracy) {
      have_epoch = true;
      result.best_val_accuracy = val_acc;
      result.best_epoch = epoch + 1;
      result.model = model;
    }
    if (on_epoch) on_epoch(epoch, epoch_loss, val_acc);
  }
  return result;
}

std::size_t predict_from_scores(const CbmModel& model, std::span<const double> scores) {
  return nn::argmax(model.head_logits(scores));
}

std::size_t predict(const CbmModel& model, std::span<const double> x) {
  return predict_from_scores(model, model.concept_scores(x));
}

std::vector<std::size_t> predict_batch(const CbmModel& model, const Matrix& images) {
  std::vector<std::size_t> out(images.rows);
  for (std::size_t r = 0; r < images.rows; ++r) out[r] = predict(model, images.row(r));
  return out;
}

Explanation explain(const CbmModel& model, std::span<const double> x) {
  Explanation e;
  e.raw_scores = model.concept_scores(x);
  e.predicted_class = predict_from_scores(model, e.raw_scores);
  e.top_concept = nn::argmax(e.raw_scores);
  const auto [lo, hi] = std::minmax_element(e.raw_scores.begin(), e.raw_scores.end());
  const double range = *hi - *lo;
  e.normalized_scores.resize(e.raw_scores.size());
  for (std::size_t i = 0; i < e.raw_scores.size(); ++i) {
    e.normalized_scores[i] = range > 0.0 ? (e.raw_scores[i] - *lo) / range : 0.5;
  }
  e.top_text = model.texts.at(e.top_concept);
  e.top_normalized = e.normalized_scores[e.top_concept];
  return e;
}

Evaluation evaluate(const CbmModel& model, const Matrix& images, std::span<const std::size_t> labels,
                    std::span<const std::size_t> rows) {
  if (rows.empty()) fail(ErrorCode::Data, "empty_split", "evaluate: test split is empty");
  Evaluation ev;
  ev.total = rows.size();
  ev.per_class_accuracy.assign(model.num_classes(), 0.0);
  ev.per_class_total.assign(model.num_classes(), 0);
  std::vector<std::size_t> per_class_correct(model.num_classes(), 0);
  for (std::size_t r : rows) {
    const std::size_t label = labels[r];
    const bool ok = predict(model, images.row(r)) == label;
    ev.correct += ok ? 1 : 0;
    if (label < model.num_classes()) {
      ev.per_class_total[label] += 1;
      per_class_correct[label] += ok ? 1 : 0;
    }
  }
  ev.accuracy = static_cast<double>(ev.correct) / static_cast<double>(ev.total);
  for (std::size_t c = 0; c < model.num_classes(); ++c) {
    if (ev.per_class_total[c] > 0) {
      ev.per_class_accuracy[c] = static_cast<double>(per_class_correct[c]) / static_cast<double>(ev.per_class_total[c]);
    }
  }
  return ev;
}

std::vector<std::uint8_t> encode_model(const CbmModel& m) {
  binary::Writer w;
  w.magic("CLCM");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(m.dim()));
  w.u32(static_cast<std::uint32_t>(m.k()));
  w.u32(static_cast<std::uint32_t>(m.num_classes()));
  for (std::size_t r = 0; r < m.dim(); ++r)
    for (std::size_t j = 0; j < m.k(); ++j) w.f32(static_cast<float>(m.concepts(j, r)));
  for (double v : m.head_weight.data) w.f64(v);
  for (double v : m.head_bias) w.f64(v);
  return w.bytes();
}

CbmModel decode_model(std::vector<std::uint8_t> bytes) {
  binary::Reader r(std::move(bytes));
  std::string magic;
  std::uint32_t version = 0, d = 0, k = 0, c = 0;
  if (!r.magic(magic)) fail(ErrorCode::Data, "truncated", "CLCM header truncated");
  if (magic != "CLCM") fail(ErrorCode::Data, "bad_magic", "not a CLCM model file");
  if (!r.u32(version)) fail(ErrorCode::Data, "truncated", "CLCM header truncated");
  if (version != 1) fail(ErrorCode::Data, "version_mismatch", "unsupported CLCM version " + std::to_string(version));
  if (!r.u32(d) || !r.u32(k) || !r.u32(c)) fail(ErrorCode::Data, "truncated", "CLCM header truncated");
  const std::uint64_t expected =
      static_cast<std::uint64_t>(d) * k * 4 + (static_cast<std::uint64_t>(c) * k + c) * 8;
  if (r.remaining() != expected) fail(ErrorCode::Data, "truncated", "CLCM payload size mismatch");
  CbmModel m{Matrix(k, d), {}, Matrix(c, k), Vector(c, 0.0), {}};
  for (std::size_t row = 0; row < d; ++row)
    for (std::size_t j = 0; j < k; ++j) {
      float v = 0.0F;
      r.f32(v);
      m.concepts(j, row) = static_cast<double>(v);
    }
  for (double& v : m.head_weight.data) r.f64(v);
  for (double& v : m.head_bias) r.f64(v);
  return m;
}

void write_model(const CbmModel& model, const std::filesystem::path& path, const std::string& meta_json) {
  binary::write_file(path, encode_model(model));
  json sidecar = json::parse(meta_json);
  sidecar["texts"] = model.texts;
  sidecar["classes"] = model.classes;
  auto sidecar_path = path;
  sidecar_path.replace_extension(".json");
  binary::write_text(sidecar_path, sidecar.dump(2) + "\n");
}

CbmModel read_model(const std::filesystem::path& path) {
  CbmModel m = decode_model(binary::read_file(path));
  auto sidecar_path = path;
  sidecar_path.replace_extension(".json");
  json sidecar;
  try {
    sidecar = json::parse(binary::read_text(sidecar_path));
    m.texts = sidecar.at("texts").get<std::vector<std::string>>();
    m.classes = sidecar.at("classes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Data, "schema", "model sidecar: " + std::string(e.what()));
  }
  m.validate();
  return m;
}

}  // namespace clear::cbm
