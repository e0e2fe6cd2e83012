// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include <cmath>
#include <numeric>

#include "clear/bottleneck.hpp"
#include "helpers.hpp"

using namespace clear;
using namespace clear::bottleneck;

namespace {

void check_grad(const Matrix& got, const nlohmann::json& want, double tol) {
  const auto w = test::matrix_from(want);
  REQUIRE(got.same_shape(w));
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.data[i] == doctest::Approx(w.data[i]).epsilon(tol));
}

struct Separable {
  Matrix images;
  std::vector<std::size_t> labels, train, val;
};

// Three well separated classes in d = 16.
Separable separable(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = 16, classes = 3;
  Matrix means = test::random_matrix(classes, d, rng);
  Separable s{Matrix(per_class * classes, d), {}, {}, {}};
  for (std::size_t r = 0; r < s.images.rows; ++r) {
    const std::size_t c = r % classes;
    for (std::size_t j = 0; j < d; ++j) s.images(r, j) = 2.0 * means(c, j) + 0.3 * rng.normal();
    s.labels.push_back(c);
    (r % 5 == 0 ? s.val : s.train).push_back(r);
  }
  return s;
}

}  // namespace

TEST_CASE("regularizers match complex-step references") {
  const auto& o = test::oracles()["regularizers"];
  const auto S = test::matrix_from(o["concepts"]);
  const auto P = test::matrix_from(o["pool"]);

  const auto sm = sm_regularizer_with_targets(S, test::matrix_from(o["targets"]));
  CHECK(sm.loss == doctest::Approx(o["sm"]["loss"].get<double>()).epsilon(1e-12));
  check_grad(sm.grad, o["sm"]["grad"], 1e-9);

  const auto eu = euclidean_regularizer(S, P);
  CHECK(eu.loss == doctest::Approx(o["euclidean"]["loss"].get<double>()).epsilon(1e-12));
  check_grad(eu.grad, o["euclidean"]["grad"], 1e-9);

  const auto stats = PoolStats::from_pool(P);
  for (std::size_t j = 0; j < stats.mu.size(); ++j) {
    CHECK(stats.mu[j] == doctest::Approx(o["mahalanobis"]["mu"][j].get<double>()).epsilon(1e-12));
  }
  check_grad(stats.sigma_inv, o["mahalanobis"]["sigma_inv"], 1e-9);
  const auto ma = mahalanobis_regularizer(S, stats);
  CHECK(ma.loss == doctest::Approx(o["mahalanobis"]["loss"].get<double>()).epsilon(1e-12));
  check_grad(ma.grad, o["mahalanobis"]["grad"], 1e-9);
}

TEST_CASE("euclidean: closed form equals the brute-force double sum") {
  Rng rng(1);
  const auto S = test::random_matrix(5, 7, rng);
  const auto P = test::random_matrix(40, 7, rng);
  double brute = 0;
  for (std::size_t j = 0; j < S.rows; ++j) {
    double inner = 0;
    for (std::size_t h = 0; h < P.rows; ++h)
      for (std::size_t i = 0; i < 7; ++i) inner += (S(j, i) - P(h, i)) * (S(j, i) - P(h, i));
    brute += inner / P.rows;
  }
  CHECK(std::abs(euclidean_regularizer(S, P).loss - brute) <= 1e-9);

  Matrix one(1, 3);
  one.data = {1, 2, 3};
  Matrix e(1, 3);
  e.data = {0, 2, 5};
  CHECK(euclidean_regularizer(one, e).loss == doctest::Approx(5.0));
  // Stationary at the pool mean.
  Matrix at_mean(1, 7);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t h = 0; h < P.rows; ++h) at_mean(0, i) += P(h, i) / P.rows;
  }
  for (double g : euclidean_regularizer(at_mean, P).grad.data) CHECK(std::abs(g) < 1e-12);
  CHECK_ERROR(euclidean_regularizer(one, Matrix(0, 3)), ErrorCode::Data, "empty_pool");
}

TEST_CASE("mahalanobis: identity covariance is mean distance to mu") {
  Rng rng(2);
  const auto S = test::random_matrix(6, 3, rng);
  PoolStats stats{Vector{0.5, -1.0, 2.0}, Matrix::identity(3)};
  double mean_dist = 0;
  for (std::size_t j = 0; j < S.rows; ++j) {
    double d2 = 0;
    for (std::size_t i = 0; i < 3; ++i) d2 += (S(j, i) - stats.mu[i]) * (S(j, i) - stats.mu[i]);
    mean_dist += std::sqrt(d2) / S.rows;
  }
  CHECK(std::abs(mahalanobis_regularizer(S, stats).loss - mean_dist) <= 1e-9);

  Matrix at_mu(2, 3);
  for (std::size_t j = 0; j < 2; ++j) std::copy(stats.mu.begin(), stats.mu.end(), at_mu.row(j).begin());
  const auto zero = mahalanobis_regularizer(at_mu, stats);
  CHECK(zero.loss == 0.0);
  for (double g : zero.grad.data) CHECK(g == 0.0);
}

TEST_CASE("pool stats: symmetric inverse, small pools stay invertible") {
  Rng rng(3);
  const auto stats = PoolStats::from_pool(test::random_matrix(3, 8, rng));  // fewer rows than d
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(stats.sigma_inv(i, j) - stats.sigma_inv(j, i)) <= 1e-8);
  CHECK_ERROR(PoolStats::from_pool(Matrix(0, 3)), ErrorCode::Data, "empty_pool");
}

TEST_CASE("sm regularizer: zero-step chains and zero score") {
  Rng rng(4);
  const auto S = test::random_matrix(4, 3, rng);
  const auto zero_net = score::affine_score_net(Matrix(3, 3));
  const auto none = sm_regularizer(S, zero_net, {0.1, 0, 7});
  CHECK(none.loss == 0.0);
  for (double g : none.grad.data) CHECK(g == 0.0);

  // s = 0, t = 1: the targets are S + sqrt(eps) z with z from the per-column streams.
  const double eps = 0.3;
  const auto one = sm_regularizer(S, zero_net, {eps, 1, 7});
  double expect = 0;
  for (std::size_t j = 0; j < S.rows; ++j) {
    Rng stream(derive_seed(7, j));
    for (std::size_t i = 0; i < 3; ++i) {
      const double step = std::sqrt(eps) * stream.normal();
      expect += step * step;
    }
  }
  CHECK(one.loss == doctest::Approx(expect / S.rows).epsilon(1e-12));

  // Frozen-target gradient against finite differences.
  const auto targets = test::random_matrix(4, 3, rng);
  const auto t = sm_regularizer_with_targets(S, targets);
  Matrix Sp = S;
  for (std::size_t i = 0; i < S.size(); ++i) {
    const double h = 1e-6, saved = Sp.data[i];
    Sp.data[i] = saved + h;
    const double up = sm_regularizer_with_targets(Sp, targets).loss;
    Sp.data[i] = saved - h;
    const double down = sm_regularizer_with_targets(Sp, targets).loss;
    Sp.data[i] = saved;
    CHECK(std::abs(t.grad.data[i] - (up - down) / (2 * h)) <= 1e-6);
  }
}

TEST_CASE("composite loss: gradient matches finite differences for every regularizer") {
  Rng rng(5);
  const std::size_t d = 4, k = 3, C = 2, n = 6;
  auto params = init_params(d, k, C, 3);
  const auto batch = test::random_matrix(n, d, rng);
  const std::vector<std::size_t> labels = {0, 1, 1, 0, 1, 0};
  const auto pool = test::random_matrix(9, d, rng);
  const auto stats = PoolStats::from_pool(pool);
  // Zero-step chains keep the SM targets equal to the current concepts, so
  // finite differences see the frozen-target objective.
  const auto net = score::affine_score_net(Matrix::identity(d, -1.0));
  RegularizerInputs inputs{&net, &pool, &stats};

  for (auto reg : {Regularizer::None, Regularizer::Euclidean, Regularizer::Mahalanobis, Regularizer::ScoreMatching}) {
    ApproxTrainConfig cfg;
    cfg.k = k;
    cfg.lambda = 0.7;
    cfg.regularizer = reg;
    cfg.langevin = {0.1, 0, 0};
    const auto lg = composite_loss(params, batch, labels, inputs, cfg, 11);
    auto value = [&](BottleneckParams& p) { return composite_loss(p, batch, labels, inputs, cfg, 11).loss; };
    auto fd_check = [&](std::vector<double>& buf, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < buf.size(); ++i) {
        const double h = 1e-6, saved = buf[i];
        buf[i] = saved + h;
        const double up = value(params);
        buf[i] = saved - h;
        const double down = value(params);
        buf[i] = saved;
        CHECK(test::rel_err(grad[i], (up - down) / (2 * h)) < 1e-6);
      }
    };
    fd_check(params.concepts.data, lg.grad.concepts.data);
    fd_check(params.head_weight.data, lg.grad.head_weight.data);
    fd_check(params.head_bias, lg.grad.head_bias);
  }
}

TEST_CASE("composite loss: lambda = 0 is plain cross entropy and none ignores lambda") {
  Rng rng(6);
  const auto params = init_params(4, 3, 2, 1);
  const auto batch = test::random_matrix(5, 4, rng);
  const std::vector<std::size_t> labels = {0, 1, 0, 1, 1};
  const auto pool = test::random_matrix(7, 4, rng);
  RegularizerInputs inputs{nullptr, &pool, nullptr};
  ApproxTrainConfig cfg;
  cfg.k = 3;
  cfg.regularizer = Regularizer::Euclidean;
  cfg.lambda = 0.0;
  const auto zero = composite_loss(params, batch, labels, inputs, cfg, 0);
  CHECK(zero.loss == zero.cross_entropy);
  cfg.regularizer = Regularizer::None;
  cfg.lambda = 123.0;
  const auto none = composite_loss(params, batch, labels, inputs, cfg, 0);
  CHECK(none.loss == zero.loss);
  CHECK(none.grad == zero.grad);
  cfg.regularizer = Regularizer::ScoreMatching;
  CHECK_ERROR(composite_loss(params, batch, labels, inputs, cfg, 0), ErrorCode::Config, "missing_input");
}

TEST_CASE("train_approximation: separable data reaches full validation accuracy") {
  const auto s = separable(60, 7);
  ApproxTrainConfig cfg;
  cfg.k = 8;
  cfg.lambda = 0.0;
  cfg.regularizer = Regularizer::None;
  cfg.epochs = 40;
  cfg.batch = 32;
  const LabeledSplits data{&s.images, s.labels, s.train, s.val, 3};
  const auto r = train_approximation(data, {}, cfg);
  CHECK(r.best_val_accuracy == 1.0);
  CHECK(accuracy(r.best, s.images, s.labels, s.val) == 1.0);
  CHECK(r.val_curve.size() == 40);
  // Earliest epoch with the best accuracy wins.
  const auto first = std::find(r.val_curve.begin(), r.val_curve.end(), r.best_val_accuracy) - r.val_curve.begin();
  CHECK(r.best_epoch == static_cast<std::size_t>(first) + 1);

  // Training accuracy trends up (10-epoch moving averages).
  double early = 0, late = 0;
  for (int i = 0; i < 10; ++i) {
    early += r.train_accuracy_curve[i];
    late += r.train_accuracy_curve[30 + i];
  }
  CHECK(late >= early);

  const auto again = train_approximation(data, {}, cfg);
  CHECK(encode_params(again.best) == encode_params(r.best));
}

TEST_CASE("train_approximation: huge lambda with zero-step chains equals lambda = 0") {
  const auto s = separable(30, 8);
  const auto net = score::affine_score_net(Matrix::identity(16, -1.0));
  ApproxTrainConfig cfg;
  cfg.k = 4;
  cfg.epochs = 5;
  cfg.batch = 16;
  cfg.lambda = 0.0;
  const LabeledSplits data{&s.images, s.labels, s.train, s.val, 3};
  const auto base = train_approximation(data, {&net, nullptr, nullptr}, cfg);
  cfg.lambda = 1e6;
  cfg.langevin.steps = 0;
  const auto big = train_approximation(data, {&net, nullptr, nullptr}, cfg);
  CHECK(encode_params(base.best) == encode_params(big.best));
  CHECK(base.val_curve == big.val_curve);
}

TEST_CASE("train_approximation: regularizer none never reads the score net") {
  const auto s = separable(30, 9);
  Rng rng(1);
  score::ScoreNet a{nn::MlpParams::random(16, 8, 16, nn::Activation::Softplus, rng), ""};
  score::ScoreNet b{nn::MlpParams::random(16, 8, 16, nn::Activation::Softplus, rng), ""};
  ApproxTrainConfig cfg;
  cfg.k = 4;
  cfg.epochs = 5;
  cfg.batch = 16;
  cfg.lambda = 5.0;
  cfg.regularizer = Regularizer::None;
  const LabeledSplits data{&s.images, s.labels, s.train, s.val, 3};
  const auto ra = train_approximation(data, {&a, nullptr, nullptr}, cfg);
  const auto rb = train_approximation(data, {&b, nullptr, nullptr}, cfg);
  const auto rn = train_approximation(data, {}, cfg);
  CHECK(encode_params(ra.best) == encode_params(rb.best));
  CHECK(encode_params(ra.best) == encode_params(rn.best));
  CHECK(ra.loss_curve == rb.loss_curve);
}

TEST_CASE("train_approximation: errors") {
  const auto s = separable(10, 10);
  ApproxTrainConfig cfg;
  cfg.k = 2;
  cfg.regularizer = Regularizer::None;
  const std::vector<std::size_t> empty;
  CHECK_ERROR(train_approximation({&s.images, s.labels, s.train, empty, 3}, {}, cfg), ErrorCode::Data, "empty_split");
  cfg.epochs = 0;
  CHECK_ERROR(cfg.validate(), ErrorCode::Config, "invalid_config");
  cfg.epochs = 1;
  cfg.lambda = -1;
  CHECK_ERROR(cfg.validate(), ErrorCode::Config, "invalid_config");
  CHECK_ERROR(regularizer_from_string("l1"), ErrorCode::Config, "invalid_config");
  CHECK(regularizer_from_string("mahalanobis") == Regularizer::Mahalanobis);
}

TEST_CASE("init_params: unit-norm concepts") {
  const auto p = init_params(10, 6, 4, 2);
  for (std::size_t j = 0; j < p.k(); ++j) CHECK(norm(p.concepts.row(j)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.head_weight.rows == 4);
  CHECK(p.head_weight.cols == 6);
}

TEST_CASE("predict_approx: ties and constant shifts") {
  BottleneckParams zero{Matrix(3, 4), Matrix(2, 3), Vector(2, 0.0)};
  CHECK(predict_approx(zero, Vector{1, 2, 3, 4}) == 0);

  Rng rng(3);
  auto p = init_params(4, 3, 3, 5);
  Vector x(4);
  rng.fill_normal(x);
  const auto c = predict_approx(p, x);
  for (double& b : p.head_bias) b += 17.0;
  CHECK(predict_approx(p, x) == c);
}

TEST_CASE("clbn: round trip and corruption") {
  const auto p = init_params(5, 3, 2, 1);
  const auto bytes = encode_params(p);
  CHECK(decode_params(bytes) == p);
  auto bad = bytes;
  bad[1] = 'X';
  CHECK_ERROR(decode_params(bad), ErrorCode::Data, "bad_magic");
  bad = bytes;
  bad.pop_back();
  CHECK_ERROR(decode_params(bad), ErrorCode::Data, "truncated");
  bad = bytes;
  bad[4] = 3;
  CHECK_ERROR(decode_params(bad), ErrorCode::Data, "version_mismatch");
}
