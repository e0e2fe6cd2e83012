// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include "clear/score.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "clear/binary.hpp"
#include "clear/error.hpp"
#include "clear/hash.hpp"

namespace clear::score {

using nlohmann::json;

const char* to_string(SliceDistribution s) { return s == SliceDistribution::Rademacher ? "rademacher" : "gaussian"; }

SliceDistribution slice_distribution_from_string(const std::string& name) {
  if (name == "rademacher") return SliceDistribution::Rademacher;
  if (name == "gaussian") return SliceDistribution::Gaussian;
  fail(ErrorCode::Config, "invalid_config", "unknown slice distribution '" + name + "'");
}

void SsmConfig::validate() const {
  if (image_batch == 0 || descriptor_batch == 0 || slices == 0 || hidden == 0) {
    fail(ErrorCode::Config, "invalid_config", "score: batch sizes, slices and hidden width must be positive");
  }
  if (!(lr > 0.0)) fail(ErrorCode::Config, "invalid_config", "score: learning rate must be > 0");
}

ScoreNet init_score_net(std::size_t dim, const SsmConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, 0));
  return ScoreNet{nn::MlpParams::random(dim, cfg.hidden, dim, cfg.activation, rng), {}};
}

ScoreNet affine_score_net(const Matrix& a, std::span<const double> b) {
  const std::size_t d = a.cols;
  nn::MlpParams p = nn::MlpParams::zeros(d, d, a.rows, nn::Activation::Identity);
  p.layers[0].weight = Matrix::identity(d);
  p.layers[1].weight = Matrix::identity(d);
  p.layers[2].weight = a;
  if (!b.empty()) std::copy(b.begin(), b.end(), p.layers[2].bias.begin());
  return ScoreNet{std::move(p), {}};
}

Vector score(const ScoreNet& net, std::span<const double> x) { return nn::mlp_forward(net.params, x); }

Matrix score_batch(const ScoreNet& net, const Matrix& x) { return nn::mlp_forward_batch(net.params, x); }

SsmEstimate ssm_objective(const ScoreNet& net, const Matrix& batch, Rng& rng, std::size_t slices,
                          SliceDistribution dist) {
  if (batch.rows == 0) fail(ErrorCode::Data, "empty_batch", "ssm: batch is empty");
  if (slices == 0) fail(ErrorCode::Config, "invalid_config", "ssm: slices must be positive");
  Matrix v(batch.rows * slices, batch.cols);
  for (double& e : v.data) e = dist == SliceDistribution::Rademacher ? rng.rademacher() : rng.normal();
  return ssm_objective_with_slices(net, batch, v);
}

SsmEstimate ssm_objective_with_slices(const ScoreNet& net, const Matrix& batch, const Matrix& v) {
  if (batch.rows == 0) fail(ErrorCode::Data, "empty_batch", "ssm: batch is empty");
  if (v.rows == 0 || v.rows % batch.rows != 0 || v.cols != batch.cols) {
    fail(ErrorCode::Data, "shape_mismatch", "ssm: slice matrix must hold a whole number of slices per sample");
  }
  const std::size_t n = batch.rows;
  const std::size_t d = batch.cols;
  const std::size_t slices = v.rows / n;

  // Row r of the expanded problem is sample r / slices with direction v[r].
  Matrix x(n * slices, d);
  for (std::size_t r = 0; r < x.rows; ++r) std::copy_n(batch.row(r / slices).begin(), d, x.row(r).begin());

  const double scale = 1.0 / static_cast<double>(n * slices);
  SsmEstimate est;
  est.per_sample.assign(n, 0.0);
  auto term = [&](std::size_t r, std::span<const double> y, std::span<const double> u, std::span<double> gy,
                  std::span<double> gu) {
    const auto dir = v.row(r);
    double trace_term = 0.0;
    double energy = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      trace_term += dir[j] * u[j];
      energy += y[j] * y[j];
      gy[j] = scale * y[j];
      gu[j] = scale * dir[j];
    }
    const double value = trace_term + 0.5 * energy;
    est.per_sample[r / slices] += value / static_cast<double>(slices);
    return scale * value;
  };
  auto g = nn::grad_objective(net.params, x, v, term);
  est.loss = g.value;
  est.grads = std::move(g.grad);
  return est;
}

std::string data_fingerprint(const io::EmbeddingSet& images, const io::EmbeddingSet& descriptors) {
  auto bytes = io::encode_embeddings(images);
  const auto more = io::encode_embeddings(descriptors);
  bytes.insert(bytes.end(), more.begin(), more.end());
  return "sha256:" + sha256_hex(bytes);
}

TrainScoreResult train_score(const io::EmbeddingSet& images, const io::EmbeddingSet& descriptors,
                             const SsmConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (images.rows == 0) fail(ErrorCode::Data, "empty_split", "score: no image embeddings");
  if (descriptors.rows > 0 && descriptors.dim != images.dim) {
    fail(ErrorCode::Data, "dim_mismatch", "score: image and descriptor dimensions differ");
  }
  const std::size_t d = images.dim;
  const Matrix img = images.to_matrix();
  const Matrix desc = descriptors.to_matrix();

  TrainScoreResult result{init_score_net(d, cfg), {}};
  result.net.fingerprint = data_fingerprint(images, descriptors);
  nn::AdamState adam(result.net.params.parameter_count(), nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});

  Rng order_rng(derive_seed(cfg.seed, 1));
  Rng slice_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> image_order(img.rows);
  std::iota(image_order.begin(), image_order.end(), 0);
  std::vector<std::size_t> desc_order(desc.rows);
  std::iota(desc_order.begin(), desc_order.end(), 0);
  if (!desc_order.empty()) order_rng.shuffle(desc_order);
  std::size_t desc_cursor = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(image_order);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < img.rows; start += cfg.image_batch) {
      const std::size_t n_img = std::min(cfg.image_batch, img.rows - start);
      const std::size_t n_desc = desc.rows == 0 ? 0 : cfg.descriptor_batch;
      Matrix batch(n_img + n_desc, d);
      for (std::size_t i = 0; i < n_img; ++i) {
        std::copy_n(img.row(image_order[start + i]).begin(), d, batch.row(i).begin());
      }
      for (std::size_t i = 0; i < n_desc; ++i) {
        if (desc_cursor == desc_order.size()) {
          order_rng.shuffle(desc_order);
          desc_cursor = 0;
        }
        std::copy_n(desc.row(desc_order[desc_cursor++]).begin(), d, batch.row(n_img + i).begin());
      }
      auto est = ssm_objective(result.net, batch, slice_rng, cfg.slices, cfg.slice);
      nn::adam_step(result.net.params, est.grads, adam);
      loss_sum += est.loss;
      ++steps;
    }
    const double epoch_loss = loss_sum / static_cast<double>(steps);
    if (!std::isfinite(epoch_loss)) {
      fail(ErrorCode::Divergence, "non_finite", "score: loss diverged at epoch " + std::to_string(epoch));
    }
    result.epoch_losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

void save_score_net(const ScoreNet& net, const std::filesystem::path& clnn_path, const std::string& meta_json) {
  nn::write_mlp(net.params, clnn_path);
  json sidecar = json::parse(meta_json);
  sidecar["activation"] = nn::to_string(net.params.activation);
  sidecar["fingerprint"] = net.fingerprint;
  sidecar["dim"] = net.dim();
  sidecar["hidden"] = net.params.hidden_dim();
  auto sidecar_path = clnn_path;
  sidecar_path.replace_extension(".json");
  binary::write_text(sidecar_path, sidecar.dump(2) + "\n");
}

ScoreNet load_score_net(const std::filesystem::path& clnn_path) {
  auto sidecar_path = clnn_path;
  sidecar_path.replace_extension(".json");
  nn::Activation act = nn::Activation::Softplus;
  std::string fingerprint;
  if (std::filesystem::exists(sidecar_path)) {
    json sidecar;
    try {
      sidecar = json::parse(binary::read_text(sidecar_path));
    } catch (const json::exception& e) {
      fail(ErrorCode::Data, "schema", "score sidecar: " + std::string(e.what()));
    }
    act = nn::activation_from_string(sidecar.value("activation", std::string("softplus")));
    fingerprint = sidecar.value("fingerprint", std::string());
  }
  return ScoreNet{nn::read_mlp(clnn_path, act), fingerprint};
}

}  // namespace clear::score
