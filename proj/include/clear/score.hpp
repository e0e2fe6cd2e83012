// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include "clear/io.hpp"
#include "clear/nn.hpp"

// Score network s(x) ~ grad_x log p(x) over pooled image and descriptor
// embeddings, trained by sliced score matching.
namespace clear::score {

enum class SliceDistribution { Rademacher, Gaussian };
const char* to_string(SliceDistribution s);
SliceDistribution slice_distribution_from_string(const std::string& name);

struct SsmConfig {
  std::size_t epochs = 1000;
  double lr = 1e-4;
  std::size_t image_batch = 4096;
  std::size_t descriptor_batch = 32;
  std::size_t slices = 1;
  SliceDistribution slice = SliceDistribution::Rademacher;
  std::uint64_t seed = 0;
  std::size_t hidden = 1024;
  nn::Activation activation = nn::Activation::Softplus;

  // Throws Config/"invalid_config".
  void validate() const;
};

struct ScoreNet {
  nn::MlpParams params;
  // "sha256:<hex>" over the training embeddings plus their shapes; empty for
  // nets that were not trained on data.
  std::string fingerprint;

  std::size_t dim() const { return params.input_dim(); }
};

ScoreNet init_score_net(std::size_t dim, const SsmConfig& cfg);

// s(x) = A x + b realised exactly as a 3-layer identity-activation MLP.
ScoreNet affine_score_net(const Matrix& a, std::span<const double> b = {});

Vector score(const ScoreNet& net, std::span<const double> x);
Matrix score_batch(const ScoreNet& net, const Matrix& x);

struct SsmEstimate {
  // (1 / (n * slices)) * sum_x sum_v [ v . J_s(x) v + 0.5 |s(x)|^2 ]
  double loss = 0.0;
  nn::MlpParams grads;
  // Per-sample term averaged over that sample's slices (length n).
  std::vector<double> per_sample;
};

// Draws `slices` directions per row from `rng`. Throws Divergence on a
// non-finite loss.
SsmEstimate ssm_objective(const ScoreNet& net, const Matrix& batch, Rng& rng, std::size_t slices = 1,
                          SliceDistribution dist = SliceDistribution::Rademacher);

// Same estimate with explicit slice directions: v holds n * n_v rows, rows
// i * n_v .. i * n_v + n_v - 1 belonging to sample i.
SsmEstimate ssm_objective_with_slices(const ScoreNet& net, const Matrix& batch, const Matrix& v);

struct TrainScoreResult {
  ScoreNet net;
  std::vector<double> epoch_losses;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

// One epoch is a pass over the image rows in shuffled order; each step
// concatenates an image batch with the next descriptor batch (descriptors
// cycle with reshuffling). `descriptors` may have zero rows.
TrainScoreResult train_score(const io::EmbeddingSet& images, const io::EmbeddingSet& descriptors,
                             const SsmConfig& cfg, const EpochCallback& on_epoch = {});

std::string data_fingerprint(const io::EmbeddingSet& images, const io::EmbeddingSet& descriptors);

// Writes <stem>.clnn and <stem>.json (activation, fingerprint plus `meta`).
void save_score_net(const ScoreNet& net, const std::filesystem::path& clnn_path, const std::string& meta_json = "{}");
ScoreNet load_score_net(const std::filesystem::path& clnn_path);

}  // namespace clear::score
