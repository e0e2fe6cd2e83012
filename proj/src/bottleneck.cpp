// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include "clear/bottleneck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clear/binary.hpp"
#include "clear/error.hpp"
#include "clear/nn.hpp"
#include "clear/simd.hpp"

namespace clear::bottleneck {

const char* to_string(Regularizer r) {
  switch (r) {
    case Regularizer::ScoreMatching: return "sm";
    case Regularizer::Euclidean: return "euclidean";
    case Regularizer::Mahalanobis: return "mahalanobis";
    case Regularizer::None: return "none";
  }
  return "?";
}

Regularizer regularizer_from_string(const std::string& name) {
  if (name == "sm") return Regularizer::ScoreMatching;
  if (name == "euclidean") return Regularizer::Euclidean;
  if (name == "mahalanobis") return Regularizer::Mahalanobis;
  if (name == "none") return Regularizer::None;
  fail(ErrorCode::Config, "invalid_config", "unknown regularizer '" + name + "'");
}

Vector BottleneckParams::activations(std::span<const double> x) const {
  Vector a(k());
  for (std::size_t j = 0; j < k(); ++j) a[j] = dot(concepts.row(j), x);
  return a;
}

Vector BottleneckParams::logits(std::span<const double> x) const {
  const Vector a = activations(x);
  Vector z(num_classes());
  for (std::size_t c = 0; c < num_classes(); ++c) z[c] = dot(head_weight.row(c), a) + head_bias[c];
  return z;
}

bool BottleneckParams::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(concepts.data) && finite(head_weight.data) && finite(head_bias);
}

BottleneckParams init_params(std::size_t dim, std::size_t k, std::size_t num_classes, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 10));
  BottleneckParams p{Matrix(k, dim), Matrix(num_classes, k), Vector(num_classes, 0.0)};
  for (std::size_t j = 0; j < k; ++j) {
    auto row = p.concepts.row(j);
    double n = 0.0;
    while (n == 0.0) {
      rng.fill_normal(row);
      n = norm(row);
    }
    for (double& v : row) v /= n;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(k));
  for (double& w : p.head_weight.data) w = bound * (2.0 * rng.uniform() - 1.0);
  for (double& b : p.head_bias) b = bound * (2.0 * rng.uniform() - 1.0);
  return p;
}

void ApproxTrainConfig::validate() const {
  if (k == 0) fail(ErrorCode::Config, "invalid_config", "bottleneck: k must be >= 1");
  if (!(lambda >= 0.0)) fail(ErrorCode::Config, "invalid_config", "bottleneck: lambda must be >= 0");
  if (epochs == 0) fail(ErrorCode::Config, "invalid_config", "bottleneck: epochs must be >= 1");
  if (batch == 0) fail(ErrorCode::Config, "invalid_config", "bottleneck: batch must be >= 1");
  if (!(lr > 0.0)) fail(ErrorCode::Config, "invalid_config", "bottleneck: lr must be > 0");
  if (regularizer == Regularizer::ScoreMatching) langevin.validate();
}

namespace {

// Lower-triangular Cholesky factor in place; false if not positive-definite.
bool cholesky(Matrix& a) {
  const std::size_t n = a.rows;
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t p = 0; p < j; ++p) diag -= a(j, p) * a(j, p);
    if (!(diag > 0.0) || !std::isfinite(diag)) return false;
    const double l = std::sqrt(diag);
    a(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a(i, j);
      for (std::size_t p = 0; p < j; ++p) v -= a(i, p) * a(j, p);
      a(i, j) = v / l;
    }
    for (std::size_t i = 0; i < j; ++i) a(i, j) = 0.0;
  }
  return true;
}

// Inverse from a Cholesky factor L (A = L L^T), column by column.
Matrix cholesky_inverse(const Matrix& l) {
  const std::size_t n = l.rows;
  Matrix inv(n, n);
  Vector y(n), x(n);
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = i == col ? 1.0 : 0.0;
      for (std::size_t p = 0; p < i; ++p) v -= l(i, p) * y[p];
      y[i] = v / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double v = y[ii];
      for (std::size_t p = ii + 1; p < n; ++p) v -= l(p, ii) * x[p];
      x[ii] = v / l(ii, ii);
    }
    for (std::size_t i = 0; i < n; ++i) inv(i, col) = x[i];
  }
  // Symmetrise away rounding asymmetry.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = m;
      inv(j, i) = m;
    }
  return inv;
}

void check_dims(const Matrix& concepts, std::size_t d, const char* what) {
  if (concepts.cols != d) fail(ErrorCode::Data, "dim_mismatch", std::string(what) + ": dimension mismatch");
}

}  // namespace

PoolStats PoolStats::from_pool(const Matrix& pool) {
  if (pool.rows == 0) fail(ErrorCode::Data, "empty_pool", "pool statistics need at least one descriptor");
  const std::size_t d = pool.cols;
  PoolStats st{Vector(d, 0.0), Matrix()};
  for (std::size_t h = 0; h < pool.rows; ++h)
    for (std::size_t i = 0; i < d; ++i) st.mu[i] += pool(h, i);
  for (double& m : st.mu) m /= static_cast<double>(pool.rows);

  Matrix cov(d, d);
  Vector centred(d);
  for (std::size_t h = 0; h < pool.rows; ++h) {
    for (std::size_t i = 0; i < d; ++i) centred[i] = pool(h, i) - st.mu[i];
    for (std::size_t i = 0; i < d; ++i) simd::axpy(centred[i], centred.data(), cov.row(i).data(), d);
  }
  const double denom = pool.rows > 1 ? static_cast<double>(pool.rows - 1) : 1.0;
  double trace = 0.0;
  for (double& c : cov.data) c /= denom;
  for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);
  const double ridge = 1e-4 * trace / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) cov(i, i) += ridge;
  if (!cholesky(cov)) fail(ErrorCode::Data, "singular_covariance", "pool covariance is singular even with ridge");
  st.sigma_inv = cholesky_inverse(cov);
  return st;
}

RegularizerTerm sm_regularizer_with_targets(const Matrix& concepts, const Matrix& targets) {
  if (!concepts.same_shape(targets)) fail(ErrorCode::Data, "shape_mismatch", "sm: targets shape differs");
  RegularizerTerm t{0.0, Matrix(concepts.rows, concepts.cols)};
  const double inv_k = 1.0 / static_cast<double>(concepts.rows);
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    const double diff = concepts.data[i] - targets.data[i];
    t.loss += diff * diff;
    t.grad.data[i] = 2.0 * inv_k * diff;
  }
  t.loss *= inv_k;
  return t;
}

RegularizerTerm sm_regularizer(const Matrix& concepts, const score::ScoreNet& net,
                               const langevin::LangevinConfig& lcfg) {
  check_dims(concepts, net.dim(), "sm regularizer");
  const Matrix targets = langevin::batch_chain(concepts, net, lcfg);
  return sm_regularizer_with_targets(concepts, targets);
}

RegularizerTerm euclidean_regularizer(const Matrix& concepts, const Matrix& pool) {
  if (pool.rows == 0) fail(ErrorCode::Data, "empty_pool", "euclidean regularizer needs a non-empty pool");
  check_dims(concepts, pool.cols, "euclidean regularizer");
  const std::size_t d = pool.cols;
  Vector mean(d, 0.0);
  double mean_sq_norm = 0.0;
  for (std::size_t h = 0; h < pool.rows; ++h) {
    const auto e = pool.row(h);
    for (std::size_t i = 0; i < d; ++i) mean[i] += e[i];
    mean_sq_norm += dot(e, e);
  }
  const double inv_p = 1.0 / static_cast<double>(pool.rows);
  for (double& m : mean) m *= inv_p;
  mean_sq_norm *= inv_p;
  const double mean_norm_sq = dot(mean, mean);

  // (1/|P|) sum_h |s - e_h|^2 = |s - mean|^2 + mean(|e|^2) - |mean|^2
  RegularizerTerm t{0.0, Matrix(concepts.rows, d)};
  for (std::size_t j = 0; j < concepts.rows; ++j) {
    const auto s = concepts.row(j);
    auto g = t.grad.row(j);
    double dist = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = s[i] - mean[i];
      dist += diff * diff;
      g[i] = 2.0 * diff;
    }
    t.loss += dist + mean_sq_norm - mean_norm_sq;
  }
  return t;
}

RegularizerTerm mahalanobis_regularizer(const Matrix& concepts, const PoolStats& stats) {
  const std::size_t d = stats.mu.size();
  check_dims(concepts, d, "mahalanobis regularizer");
  RegularizerTerm t{0.0, Matrix(concepts.rows, d)};
  const double inv_k = 1.0 / static_cast<double>(concepts.rows);
  Vector diff(d), weighted(d);
  for (std::size_t j = 0; j < concepts.rows; ++j) {
    for (std::size_t i = 0; i < d; ++i) diff[i] = concepts(j, i) - stats.mu[i];
    for (std::size_t i = 0; i < d; ++i) weighted[i] = dot(stats.sigma_inv.row(i), diff);
    const double dist = std::sqrt(std::max(0.0, dot(diff, weighted)));
    t.loss += dist;
    if (dist >= 1e-12) {
      auto g = t.grad.row(j);
      for (std::size_t i = 0; i < d; ++i) g[i] = inv_k * weighted[i] / dist;
    }
  }
  t.loss *= inv_k;
  return t;
}

CompositeLoss composite_loss(const BottleneckParams& params, const Matrix& batch, std::span<const std::size_t> labels,
                             const RegularizerInputs& inputs, const ApproxTrainConfig& cfg, std::uint64_t chain_seed) {
  if (batch.rows == 0) fail(ErrorCode::Data, "empty_batch", "composite loss: empty batch");
  if (labels.size() != batch.rows) fail(ErrorCode::Data, "shape_mismatch", "composite loss: label count mismatch");
  check_dims(params.concepts, batch.cols, "composite loss");
  const std::size_t n = batch.rows;

  CompositeLoss out;
  out.grad = BottleneckParams{Matrix(params.k(), params.dim()), Matrix(params.num_classes(), params.k()),
                              Vector(params.num_classes(), 0.0)};

  const Matrix acts = matmul_nt(batch, params.concepts);
  const Matrix logits = matmul_nt(acts, params.head_weight, params.head_bias);
  Matrix grad_logits(n, params.num_classes());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto ce = nn::softmax_cross_entropy(logits.row(r), labels[r]);
    out.cross_entropy += ce.loss;
    auto g = grad_logits.row(r);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = inv_n * ce.grad_logits[c];
  }
  out.cross_entropy *= inv_n;

  accumulate_tn(grad_logits, acts, out.grad.head_weight);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < params.num_classes(); ++c) out.grad.head_bias[c] += grad_logits(r, c);
  const Matrix grad_acts = matmul_nn(grad_logits, params.head_weight);
  accumulate_tn(grad_acts, batch, out.grad.concepts);

  if (!cfg.regularizer_off()) {
    RegularizerTerm reg;
    switch (cfg.regularizer) {
      case Regularizer::ScoreMatching: {
        if (inputs.net == nullptr) fail(ErrorCode::Config, "missing_input", "sm regularizer needs a score network");
        langevin::LangevinConfig lcfg = cfg.langevin;
        lcfg.seed = chain_seed;
        reg = sm_regularizer(params.concepts, *inputs.net, lcfg);
        break;
      }
      case Regularizer::Euclidean:
        if (inputs.pool == nullptr) fail(ErrorCode::Config, "missing_input", "euclidean regularizer needs the pool");
        reg = euclidean_regularizer(params.concepts, *inputs.pool);
        break;
      case Regularizer::Mahalanobis:
        if (inputs.stats == nullptr) fail(ErrorCode::Config, "missing_input", "mahalanobis regularizer needs stats");
        reg = mahalanobis_regularizer(params.concepts, *inputs.stats);
        break;
      case Regularizer::None:
        break;
    }
    out.regularizer = reg.loss;
    for (std::size_t i = 0; i < reg.grad.size(); ++i) out.grad.concepts.data[i] += cfg.lambda * reg.grad.data[i];
  }
  out.loss = cfg.lambda * out.regularizer + out.cross_entropy;
  if (!std::isfinite(out.loss)) fail(ErrorCode::Divergence, "non_finite", "composite loss is not finite");
  return out;
}

std::size_t predict_approx(const BottleneckParams& params, std::span<const double> x) {
  return nn::argmax(params.logits(x));
}

double accuracy(const BottleneckParams& params, const Matrix& images, std::span<const std::size_t> labels,
                std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t r : rows)
    if (predict_approx(params, images.row(r)) == labels[r]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

TrainApproxResult train_approximation(const LabeledSplits& data, const RegularizerInputs& inputs,
                                      const ApproxTrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.images == nullptr) fail(ErrorCode::Config, "missing_input", "bottleneck: no images");
  if (data.train.empty()) fail(ErrorCode::Data, "empty_split", "bottleneck: train split is empty");
  if (data.val.empty()) fail(ErrorCode::Data, "empty_split", "bottleneck: validation split is empty");
  if (data.num_classes == 0) fail(ErrorCode::Data, "schema", "bottleneck: no classes");
  const Matrix& images = *data.images;
  const std::size_t d = images.cols;

  BottleneckParams params = init_params(d, cfg.k, data.num_classes, cfg.seed);
  nn::AdamState adam(params.concepts.size() + params.head_weight.size() + params.head_bias.size(),
                     nn::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Rng order_rng(derive_seed(cfg.seed, 11));
  const std::uint64_t chain_base = derive_seed(cfg.seed, 12);

  TrainApproxResult result;
  result.best = params;
  result.best_val_accuracy = -1.0;
  std::vector<std::size_t> order(data.train.begin(), data.train.end());
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t n = std::min(cfg.batch, order.size() - start);
      Matrix batch(n, d);
      std::vector<std::size_t> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(images.row(order[start + i]).begin(), d, batch.row(i).begin());
        labels[i] = data.labels[order[start + i]];
      }
      const auto lg = composite_loss(params, batch, labels, inputs, cfg, derive_seed(chain_base, step++));
      nn::adam_step({std::span<double>(params.concepts.data), std::span<double>(params.head_weight.data),
                     std::span<double>(params.head_bias)},
                    {std::span<const double>(lg.grad.concepts.data), std::span<const double>(lg.grad.head_weight.data),
                     std::span<const double>(lg.grad.head_bias)},
                    adam);
      loss_sum += lg.loss;
      ++batches;
    }
    if (!params.all_finite()) fail(ErrorCode::Divergence, "non_finite", "bottleneck: parameters diverged");
    const double val_acc = accuracy(params, images, data.labels, data.val);
    result.val_curve.push_back(val_acc);
    result.train_accuracy_curve.push_back(accuracy(params, images, data.labels, data.train));
    result.loss_curve.push_back(loss_sum / static_cast<double>(batches));
    if (val_acc > result.best_val_accuracy) {
      result.best_val_accuracy = val_acc;
      result.best_epoch = epoch + 1;
      result.best = params;
    }
    if (on_epoch) on_epoch(epoch, result.loss_curve.back(), val_acc);
  }
  return result;
}

std::vector<std::uint8_t> encode_params(const BottleneckParams& p) {
  binary::Writer w;
  w.magic("CLBN");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(p.dim()));
  w.u32(static_cast<std::uint32_t>(p.k()));
  w.u32(static_cast<std::uint32_t>(p.num_classes()));
  for (std::size_t r = 0; r < p.dim(); ++r)
    for (std::size_t j = 0; j < p.k(); ++j) w.f64(p.concepts(j, r));
  for (double v : p.head_weight.data) w.f64(v);
  for (double v : p.head_bias) w.f64(v);
  return w.bytes();
}

BottleneckParams decode_params(std::vector<std::uint8_t> bytes) {
  binary::Reader r(std::move(bytes));
  std::string magic;
  std::uint32_t version = 0, d = 0, k = 0, c = 0;
  if (!r.magic(magic)) fail(ErrorCode::Data, "truncated", "CLBN header truncated");
  if (magic != "CLBN") fail(ErrorCode::Data, "bad_magic", "not a CLBN checkpoint");
  if (!r.u32(version)) fail(ErrorCode::Data, "truncated", "CLBN header truncated");
  if (version != 1) fail(ErrorCode::Data, "version_mismatch", "unsupported CLBN version " + std::to_string(version));
  if (!r.u32(d) || !r.u32(k) || !r.u32(c)) fail(ErrorCode::Data, "truncated", "CLBN header truncated");
  const std::uint64_t expected = (static_cast<std::uint64_t>(d) * k + static_cast<std::uint64_t>(c) * k + c) * 8;
  if (r.remaining() != expected) fail(ErrorCode::Data, "truncated", "CLBN payload size mismatch");
  BottleneckParams p{Matrix(k, d), Matrix(c, k), Vector(c, 0.0)};
  for (std::size_t row = 0; row < d; ++row)
    for (std::size_t j = 0; j < k; ++j) r.f64(p.concepts(j, row));
  for (double& v : p.head_weight.data) r.f64(v);
  for (double& v : p.head_bias) r.f64(v);
  if (!p.all_finite()) fail(ErrorCode::Data, "non_finite", "CLBN checkpoint contains non-finite values");
  return p;
}

void write_params(const BottleneckParams& p, const std::filesystem::path& path) {
  binary::write_file(path, encode_params(p));
}

BottleneckParams read_params(const std::filesystem::path& path) { return decode_params(binary::read_file(path)); }

}  // namespace clear::bottleneck
