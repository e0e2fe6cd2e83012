// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "clear/matrix.hpp"

// The final concept bottleneck model: frozen concept map g(x) = [S']^T x
// over selected descriptor embeddings, followed by a trained linear head.
namespace clear::cbm {

struct CbmModel {
  Matrix concepts;  // k x d, row i = embedding of texts[i]
  std::vector<std::string> texts;
  Matrix head_weight;  // |C| x k
  Vector head_bias;    // |C|
  std::vector<std::string> classes;

  std::size_t k() const { return concepts.rows; }
  std::size_t dim() const { return concepts.cols; }
  std::size_t num_classes() const { return head_weight.rows; }

  // g(x): one activation per concept.
  Vector concept_scores(std::span<const double> x) const;
  Vector head_logits(std::span<const double> scores) const;

  // Throws Data/"schema" if shapes or the unit-norm concept invariant fail.
  void validate() const;
};

struct HeadConfig {
  std::size_t epochs = 2000;
  double lr = 0.01;
  std::size_t batch = 4096;
  std::uint64_t seed = 0;

  void validate() const;
};

struct HeadData {
  const Matrix* images = nullptr;
  std::span<const std::size_t> labels;
  std::span<const std::size_t> train;
  std::span<const std::size_t> val;
};

struct TrainHeadResult {
  CbmModel model;
  std::size_t best_epoch = 0;  // completed epochs at the returned checkpoint (0 = initial head)
  double best_val_accuracy = 0.0;
  std::vector<double> val_curve;
  std::vector<double> loss_curve;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss, double val_accuracy)>;

// Adam on mean cross-entropy over g(x); `concepts` is never modified.
// Returns the epoch checkpoint with the highest validation accuracy
// (earliest on ties); with zero epochs, the initial head.
TrainHeadResult train_head(const Matrix& concepts, const std::vector<std::string>& texts,
                           const std::vector<std::string>& classes, const HeadData& data, const HeadConfig& cfg,
                           const EpochCallback& on_epoch = {});

std::size_t predict(const CbmModel& model, std::span<const double> x);
std::size_t predict_from_scores(const CbmModel& model, std::span<const double> scores);
std::vector<std::size_t> predict_batch(const CbmModel& model, const Matrix& images);

struct Explanation {
  std::size_t predicted_class = 0;
  Vector raw_scores;
  Vector normalized_scores;  // per-image min-max scaling; all 0.5 if constant
  std::size_t top_concept = 0;
  std::string top_text;
  double top_normalized = 0.0;
};

Explanation explain(const CbmModel& model, std::span<const double> x);

struct Evaluation {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<double> per_class_accuracy;  // NaN-free: classes without samples report 0
  std::vector<std::size_t> per_class_total;
};

// Throws Data/"empty_split" when rows is empty.
Evaluation evaluate(const CbmModel& model, const Matrix& images, std::span<const std::size_t> labels,
                    std::span<const std::size_t> rows);

// CLCM: "CLCM", u32 version = 1, u32 d, u32 k, u32 |C|, [S'] as d x k
// row-major f32, head weights |C| x k f64, head bias |C| f64. Texts and
// class names live in the JSON sidecar (same stem, .json extension).
std::vector<std::uint8_t> encode_model(const CbmModel& model);
CbmModel decode_model(std::vector<std::uint8_t> bytes);
void write_model(const CbmModel& model, const std::filesystem::path& path, const std::string& meta_json = "{}");
CbmModel read_model(const std::filesystem::path& path);

}  // namespace clear::cbm
