// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include <cmath>

#include "clear/nn.hpp"
#include "clear/score.hpp"
#include "helpers.hpp"

using namespace clear;

namespace {

nn::MlpParams oracle_net() {
  const auto& o = test::oracles()["mlp"];
  const std::size_t d = o["dim"], h = o["hidden"];
  auto p = nn::MlpParams::zeros(d, h, d, nn::Activation::Softplus);
  for (std::size_t l = 0; l < 3; ++l) {
    p.layers[l].weight = test::matrix_from(o["layers"][l]["weight"]);
    p.layers[l].bias = test::vector_from(o["layers"][l]["bias"]);
  }
  return p;
}

double central_difference(const std::function<double()>& f, double& param, double h) {
  const double saved = param;
  param = saved + h;
  const double up = f();
  param = saved - h;
  const double down = f();
  param = saved;
  return (up - down) / (2 * h);
}

}  // namespace

TEST_CASE("mlp: forward and jvp match the reference") {
  const auto& o = test::oracles()["mlp"];
  const auto p = oracle_net();
  const auto x = test::matrix_from(o["x"]);
  const auto v = test::matrix_from(o["v"]);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto y = nn::mlp_forward(p, x.row(r));
    const auto u = nn::mlp_jvp(p, x.row(r), v.row(r));
    for (std::size_t j = 0; j < y.size(); ++j) {
      CHECK(y[j] == doctest::Approx(o["forward"][r][j].get<double>()).epsilon(1e-12));
      CHECK(u[j] == doctest::Approx(o["jvp"][r][j].get<double>()).epsilon(1e-12));
    }
  }
  const auto batch = nn::mlp_forward_jvp_batch(p, x, v);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const auto y = nn::mlp_forward(p, x.row(r));
    for (std::size_t j = 0; j < y.size(); ++j) CHECK(batch.value(r, j) == y[j]);
  }
  CHECK(nn::mlp_forward_batch(p, x) == batch.value);
}

TEST_CASE("mlp: ssm loss and second-order gradient match complex-step reference") {
  const auto& o = test::oracles()["mlp"];
  score::ScoreNet net{oracle_net(), ""};
  const auto est = score::ssm_objective_with_slices(net, test::matrix_from(o["x"]), test::matrix_from(o["v"]));
  CHECK(est.loss == doctest::Approx(o["ssm_loss"].get<double>()).epsilon(1e-12));
  std::size_t i = 0;
  for (const auto& block : est.grads.blocks()) {
    for (double g : block) {
      CHECK(g == doctest::Approx(o["ssm_grad"][i].get<double>()).epsilon(1e-10));
      ++i;
    }
  }
  CHECK(i == o["ssm_grad"].size());
}

TEST_CASE("mlp: jvp is linear in the direction") {
  Rng rng(12);
  auto p = nn::MlpParams::random(4, 6, 4, nn::Activation::Softplus, rng);
  Vector x(4), a(4), b(4);
  rng.fill_normal(x);
  rng.fill_normal(a);
  rng.fill_normal(b);
  Vector mix(4);
  for (int i = 0; i < 4; ++i) mix[i] = 2.5 * a[i] - 0.5 * b[i];
  const auto ja = nn::mlp_jvp(p, x, a), jb = nn::mlp_jvp(p, x, b), jm = nn::mlp_jvp(p, x, mix);
  for (int i = 0; i < 4; ++i) CHECK(jm[i] == doctest::Approx(2.5 * ja[i] - 0.5 * jb[i]).epsilon(1e-12));

  // Against a finite difference of the forward map.
  const double h = 1e-6;
  Vector xp = x, xm = x;
  for (int i = 0; i < 4; ++i) {
    xp[i] += h * a[i];
    xm[i] -= h * a[i];
  }
  const auto fp = nn::mlp_forward(p, xp), fm = nn::mlp_forward(p, xm);
  for (int i = 0; i < 4; ++i) CHECK(ja[i] == doctest::Approx((fp[i] - fm[i]) / (2 * h)).epsilon(1e-7));
}

TEST_CASE("mlp: grad_objective matches finite differences for a generic objective") {
  Rng rng(13);
  auto p = nn::MlpParams::random(3, 5, 2, nn::Activation::Softplus, rng);
  const auto x = test::random_matrix(4, 3, rng);
  const auto v = test::random_matrix(4, 3, rng);
  // f = sum_r sin(y0) * u1 + y1^2
  auto obj = [](std::size_t, std::span<const double> y, std::span<const double> u, std::span<double> gy,
                std::span<double> gu) {
    gy[0] = std::cos(y[0]) * u[1];
    gy[1] = 2 * y[1];
    gu[0] = 0;
    gu[1] = std::sin(y[0]);
    return std::sin(y[0]) * u[1] + y[1] * y[1];
  };
  const auto g = nn::grad_objective(p, x, v, obj);
  auto value = [&] { return nn::grad_objective(p, x, v, obj).value; };
  auto pb = p.blocks();
  auto gb = g.grad.blocks();
  for (std::size_t b = 0; b < pb.size(); ++b) {
    for (std::size_t i = 0; i < pb[b].size(); ++i) {
      const double fd = central_difference(value, pb[b][i], 1e-5);
      CHECK(test::rel_err(gb[b][i], fd) < 1e-7);
    }
  }
}

TEST_CASE("mlp: value-only objective skips the tangent path") {
  Rng rng(14);
  auto p = nn::MlpParams::random(3, 4, 3, nn::Activation::Softplus, rng);
  const auto x = test::random_matrix(5, 3, rng);
  auto obj = [](std::size_t, std::span<const double> y, std::span<const double> u, std::span<double> gy,
                std::span<double>) {
    CHECK(u.empty());
    double s = 0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      s += 0.5 * y[j] * y[j];
      gy[j] = y[j];
    }
    return s;
  };
  const auto g = nn::grad_objective(p, x, Matrix(), obj);
  auto value = [&] { return nn::grad_objective(p, x, Matrix(), obj).value; };
  auto pb = p.blocks();
  auto gb = g.grad.blocks();
  for (std::size_t i = 0; i < pb[0].size(); ++i) {
    CHECK(test::rel_err(gb[0][i], central_difference(value, pb[0][i], 1e-5)) < 1e-7);
  }
}

TEST_CASE("mlp: identity activation is affine") {
  Rng rng(15);
  auto p = nn::MlpParams::random(2, 3, 2, nn::Activation::Identity, rng);
  Vector x = {0.3, -1.2}, v = {1.0, 0.5};
  const auto u1 = nn::mlp_jvp(p, x, v);
  const auto u2 = nn::mlp_jvp(p, Vector{5.0, 7.0}, v);
  for (int i = 0; i < 2; ++i) CHECK(u1[i] == doctest::Approx(u2[i]).epsilon(1e-12));
}

TEST_CASE("adam: matches the reference over three steps") {
  const auto& o = test::oracles()["adam"];
  Vector theta = test::vector_from(o["theta"]);
  nn::AdamState st(theta.size(), {o["lr"].get<double>()});
  for (std::size_t t = 0; t < 3; ++t) {
    const Vector g = test::vector_from(o["grads"][t]);
    nn::adam_step(theta, g, st);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      CHECK(theta[i] == doctest::Approx(o["after_each_step"][t][i].get<double>()).epsilon(1e-14));
    }
  }
  CHECK(st.step == 3);
}

TEST_CASE("adam: first step moves each coordinate by lr against the gradient sign") {
  Vector theta = {1.0, -2.0, 0.5};
  const Vector g = {3.0, -0.25, 1e-3};
  nn::AdamState st(3, {0.1});
  nn::adam_step(theta, g, st);
  CHECK(theta[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(theta[1] == doctest::Approx(-1.9).epsilon(1e-6));
  CHECK(theta[2] == doctest::Approx(0.4).epsilon(1e-4));
}

TEST_CASE("adam: zero gradient is a fixed point") {
  Vector theta = {1.0, -2.0};
  nn::AdamState st(2, {0.1});
  for (int i = 0; i < 10; ++i) nn::adam_step(theta, Vector{0.0, 0.0}, st);
  CHECK(theta == Vector{1.0, -2.0});
}

TEST_CASE("adam: errors") {
  Vector theta = {1.0};
  nn::AdamState st(1, {0.1});
  CHECK_ERROR(nn::adam_step(theta, Vector{NAN}, st), ErrorCode::Divergence, "non_finite_gradient");
  Vector two = {1.0, 2.0};
  CHECK_ERROR(nn::adam_step(two, Vector{0.0, 0.0}, st), ErrorCode::Data, "shape_mismatch");
}

TEST_CASE("cross entropy: reference cases") {
  for (const auto& c : test::oracles()["cross_entropy"]) {
    const Vector z = test::vector_from(c["logits"]);
    const auto ce = nn::softmax_cross_entropy(z, c["label"].get<std::size_t>());
    CHECK(ce.loss == doctest::Approx(c["loss"].get<double>()).epsilon(1e-12));
    for (std::size_t i = 0; i < z.size(); ++i) {
      CHECK(ce.grad_logits[i] == doctest::Approx(c["grad"][i].get<double>()).epsilon(1e-12));
    }
  }
  CHECK(nn::softmax_cross_entropy(Vector{0.0, 0.0}, 0).loss == doctest::Approx(std::log(2.0)));
  CHECK_ERROR(nn::softmax_cross_entropy(Vector{0.0, 0.0}, 2), ErrorCode::Data, "label_out_of_range");
}

TEST_CASE("argmax ties go to the lowest index") {
  CHECK(nn::argmax(Vector{1.0, 3.0, 3.0}) == 1);
  CHECK(nn::argmax(Vector{0.0, 0.0, 0.0}) == 0);
}

TEST_CASE("clnn: round trip and corruption") {
  Rng rng(16);
  const auto p = nn::MlpParams::random(3, 4, 3, nn::Activation::Softplus, rng);
  const auto bytes = nn::encode_mlp(p);
  CHECK(nn::decode_mlp(bytes, nn::Activation::Softplus) == p);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "CLNN");

  auto bad = bytes;
  bad[0] = 'Z';
  CHECK_ERROR(nn::decode_mlp(bad, nn::Activation::Softplus), ErrorCode::Data, "bad_magic");
  bad = bytes;
  bad[4] = 9;
  CHECK_ERROR(nn::decode_mlp(bad, nn::Activation::Softplus), ErrorCode::Data, "version_mismatch");
  bad = bytes;
  bad.resize(bad.size() - 8);
  CHECK_ERROR(nn::decode_mlp(bad, nn::Activation::Softplus), ErrorCode::Data, "truncated");
  bad = bytes;
  bad.push_back(1);
  CHECK_ERROR(nn::decode_mlp(bad, nn::Activation::Softplus), ErrorCode::Data, "trailing_bytes");
  CHECK_ERROR(nn::activation_from_string("relu6"), ErrorCode::Config, "bad_activation");
}
