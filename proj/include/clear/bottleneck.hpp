// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "clear/langevin.hpp"
#include "clear/matrix.hpp"
#include "clear/score.hpp"

// Learns the bottleneck approximation: k free concept embeddings [S] and a
// linear head W, trained with cross-entropy on W([S]^T x) plus a
// regularizer that pulls the concepts toward the embedding distribution.
namespace clear::bottleneck {

enum class Regularizer { ScoreMatching, Euclidean, Mahalanobis, None };
const char* to_string(Regularizer r);
Regularizer regularizer_from_string(const std::string& name);

// Concept j (column j of [S]) is stored as row j of `concepts` (k x d).
struct BottleneckParams {
  Matrix concepts;
  Matrix head_weight;  // |C| x k
  Vector head_bias;    // |C|

  std::size_t k() const { return concepts.rows; }
  std::size_t dim() const { return concepts.cols; }
  std::size_t num_classes() const { return head_weight.rows; }

  Vector activations(std::span<const double> x) const;
  Vector logits(std::span<const double> x) const;
  bool all_finite() const;

  friend bool operator==(const BottleneckParams&, const BottleneckParams&) = default;
};

// Random unit-norm concepts; head uniform on +-1/sqrt(k).
BottleneckParams init_params(std::size_t dim, std::size_t k, std::size_t num_classes, std::uint64_t seed);

struct ApproxTrainConfig {
  std::size_t k = 8;
  double lambda = 0.01;
  langevin::LangevinConfig langevin{};
  Regularizer regularizer = Regularizer::ScoreMatching;
  double lr = 0.01;
  std::size_t batch = 4096;
  std::size_t epochs = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  // True when the regularizer contributes nothing (none, or lambda = 0).
  bool regularizer_off() const { return regularizer == Regularizer::None || lambda == 0.0; }
};

struct PoolStats {
  Vector mu;
  Matrix sigma_inv;

  // Sample covariance with ridge 1e-4 * trace / d on the diagonal, inverted
  // through Cholesky. Throws Data/"singular_covariance" if that fails.
  static PoolStats from_pool(const Matrix& pool);
};

struct RegularizerTerm {
  double loss = 0.0;
  Matrix grad;  // k x d, same layout as concepts
};

// (1/k) sum_j |target_j - s_j|^2 with targets held constant.
RegularizerTerm sm_regularizer_with_targets(const Matrix& concepts, const Matrix& targets);
// Targets come from batch_chain(concepts, net, lcfg); fresh noise per seed.
RegularizerTerm sm_regularizer(const Matrix& concepts, const score::ScoreNet& net, const langevin::LangevinConfig& lcfg);
// sum_j (1/|P|) sum_h |s_j - e_h|^2, via the mean-centred closed form.
RegularizerTerm euclidean_regularizer(const Matrix& concepts, const Matrix& pool);
// (1/k) sum_j sqrt((s_j - mu)^T Sigma^-1 (s_j - mu)).
RegularizerTerm mahalanobis_regularizer(const Matrix& concepts, const PoolStats& stats);

// Inputs a regularizer may need; only the one selected is dereferenced.
struct RegularizerInputs {
  const score::ScoreNet* net = nullptr;
  const Matrix* pool = nullptr;
  const PoolStats* stats = nullptr;
};

struct CompositeLoss {
  double loss = 0.0;
  double cross_entropy = 0.0;
  double regularizer = 0.0;
  BottleneckParams grad;
};

// lambda * L_reg + mean cross-entropy over the batch rows.
// `chain_seed` seeds this call's Langevin targets.
CompositeLoss composite_loss(const BottleneckParams& params, const Matrix& batch, std::span<const std::size_t> labels,
                             const RegularizerInputs& inputs, const ApproxTrainConfig& cfg, std::uint64_t chain_seed);

struct LabeledSplits {
  const Matrix* images = nullptr;        // all image rows
  std::span<const std::size_t> labels;   // per image row
  std::span<const std::size_t> train;    // row indices
  std::span<const std::size_t> val;
  std::size_t num_classes = 0;
};

struct TrainApproxResult {
  BottleneckParams best;
  std::size_t best_epoch = 0;  // 1-based count of completed epochs
  double best_val_accuracy = 0.0;
  std::vector<double> val_curve;
  std::vector<double> train_accuracy_curve;
  std::vector<double> loss_curve;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss, double val_accuracy)>;

// Minibatch Adam over the composite loss; returns the epoch checkpoint with
// the highest validation accuracy (earliest on ties).
TrainApproxResult train_approximation(const LabeledSplits& data, const RegularizerInputs& inputs,
                                      const ApproxTrainConfig& cfg, const EpochCallback& on_epoch = {});

// argmax W([S]^T x); ties to the lowest class.
std::size_t predict_approx(const BottleneckParams& params, std::span<const double> x);
double accuracy(const BottleneckParams& params, const Matrix& images, std::span<const std::size_t> labels,
                std::span<const std::size_t> rows);

// CLBN: "CLBN", u32 version = 1, u32 d, u32 k, u32 |C|, [S] as d x k
// row-major f64, head weights |C| x k f64, head bias |C| f64.
std::vector<std::uint8_t> encode_params(const BottleneckParams& params);
BottleneckParams decode_params(std::vector<std::uint8_t> bytes);
void write_params(const BottleneckParams& params, const std::filesystem::path& path);
BottleneckParams read_params(const std::filesystem::path& path);

}  // namespace clear::bottleneck
