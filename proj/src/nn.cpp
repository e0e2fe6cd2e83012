// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include "clear/nn.hpp"

#include <algorithm>
#include <cmath>

#include "clear/binary.hpp"
#include "clear/error.hpp"

namespace clear::nn {

const char* to_string(Activation a) { return a == Activation::Softplus ? "softplus" : "identity"; }

Activation activation_from_string(const std::string& name) {
  if (name == "softplus") return Activation::Softplus;
  if (name == "identity") return Activation::Identity;
  fail(ErrorCode::Config, "bad_activation", "unknown activation '" + name + "'");
}

namespace {

Layer zero_layer(std::size_t in, std::size_t out) { return Layer{Matrix(out, in), Vector(out, 0.0)}; }

// Softplus and its first two derivatives, evaluated elementwise.
struct ActivationEval {
  Matrix value;
  Matrix d1;
  Matrix d2;
};

ActivationEval activate(const Matrix& pre, Activation act, bool need_d2) {
  ActivationEval e{pre, Matrix(pre.rows, pre.cols, 1.0), need_d2 ? Matrix(pre.rows, pre.cols, 0.0) : Matrix{}};
  if (act == Activation::Identity) return e;
  for (std::size_t i = 0; i < pre.size(); ++i) {
    const double z = pre.data[i];
    e.value.data[i] = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    e.d1.data[i] = s;
    if (need_d2) e.d2.data[i] = s * (1.0 - s);
  }
  return e;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) c.data[i] = a.data[i] * b.data[i];
  return c;
}

Matrix row_matrix(std::span<const double> x) {
  Matrix m(1, x.size());
  std::copy(x.begin(), x.end(), m.data.begin());
  return m;
}

void check_input(const MlpParams& p, const Matrix& x) {
  if (x.cols != p.input_dim()) {
    fail(ErrorCode::Data, "shape_mismatch",
         "input width " + std::to_string(x.cols) + " does not match network input " + std::to_string(p.input_dim()));
  }
}

void add_row_sums(const Matrix& g, Vector& bias_grad) {
  for (std::size_t r = 0; r < g.rows; ++r) {
    const auto row = g.row(r);
    for (std::size_t c = 0; c < g.cols; ++c) bias_grad[c] += row[c];
  }
}

}  // namespace

MlpParams MlpParams::zeros(std::size_t in, std::size_t hidden, std::size_t out, Activation act) {
  MlpParams p;
  p.layers = {zero_layer(in, hidden), zero_layer(hidden, hidden), zero_layer(hidden, out)};
  p.activation = act;
  return p;
}

MlpParams MlpParams::random(std::size_t in, std::size_t hidden, std::size_t out, Activation act, Rng& rng) {
  MlpParams p = zeros(in, hidden, out, act);
  for (auto& layer : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols));
    for (double& w : layer.weight.data) w = bound * (2.0 * rng.uniform() - 1.0);
    for (double& b : layer.bias) b = bound * (2.0 * rng.uniform() - 1.0);
  }
  return p;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams p;
  p.activation = activation;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    p.layers[i] = zero_layer(layers[i].weight.cols, layers[i].weight.rows);
  }
  return p;
}

std::vector<std::span<double>> MlpParams::blocks() {
  std::vector<std::span<double>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weight.data);
    out.emplace_back(l.bias);
  }
  return out;
}

std::vector<std::span<const double>> MlpParams::blocks() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers) {
    out.emplace_back(l.weight.data);
    out.emplace_back(l.bias);
  }
  return out;
}

bool MlpParams::all_finite() const {
  for (const auto& b : blocks())
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

void MlpParams::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weight.data.size() != l.weight.rows * l.weight.cols || l.bias.size() != l.weight.rows) {
      fail(ErrorCode::Data, "shape_mismatch", "layer " + std::to_string(i) + " weight/bias shapes disagree");
    }
    if (i > 0 && l.weight.cols != layers[i - 1].weight.rows) {
      fail(ErrorCode::Data, "shape_mismatch", "layer " + std::to_string(i) + " input does not chain");
    }
  }
  if (!all_finite()) fail(ErrorCode::Data, "non_finite", "network parameters contain non-finite values");
}

Matrix mlp_forward_batch(const MlpParams& p, const Matrix& x) {
  check_input(p, x);
  const bool linear = p.activation == Activation::Identity;
  Matrix h = matmul_nt(x, p.layers[0].weight, p.layers[0].bias);
  if (!linear) h = activate(h, p.activation, false).value;
  h = matmul_nt(h, p.layers[1].weight, p.layers[1].bias);
  if (!linear) h = activate(h, p.activation, false).value;
  return matmul_nt(h, p.layers[2].weight, p.layers[2].bias);
}

Vector mlp_forward(const MlpParams& p, std::span<const double> x) {
  return mlp_forward_batch(p, row_matrix(x)).data;
}

ForwardJvp mlp_forward_jvp_batch(const MlpParams& p, const Matrix& x, const Matrix& v) {
  check_input(p, x);
  if (!v.same_shape(x)) fail(ErrorCode::Data, "shape_mismatch", "direction matrix shape differs from input");
  const auto a1 = activate(matmul_nt(x, p.layers[0].weight, p.layers[0].bias), p.activation, false);
  const Matrix t1 = hadamard(a1.d1, matmul_nt(v, p.layers[0].weight));
  const auto a2 = activate(matmul_nt(a1.value, p.layers[1].weight, p.layers[1].bias), p.activation, false);
  const Matrix t2 = hadamard(a2.d1, matmul_nt(t1, p.layers[1].weight));
  return {matmul_nt(a2.value, p.layers[2].weight, p.layers[2].bias), matmul_nt(t2, p.layers[2].weight)};
}

Vector mlp_jvp(const MlpParams& p, std::span<const double> x, std::span<const double> v) {
  if (x.size() != v.size()) fail(ErrorCode::Data, "shape_mismatch", "jvp direction length differs from input");
  return mlp_forward_jvp_batch(p, row_matrix(x), row_matrix(v)).tangent.data;
}

ObjectiveGradient grad_objective(const MlpParams& p, const Matrix& x, const Matrix& v, const RowObjective& objective) {
  check_input(p, x);
  const bool tangent = v.rows > 0;
  if (tangent && !v.same_shape(x)) fail(ErrorCode::Data, "shape_mismatch", "direction matrix shape differs from input");
  const auto& [l1, l2, l3] = p.layers;
  const std::size_t n = x.rows;

  // Augmented forward: values and tangents through each layer.
  const auto a1 = activate(matmul_nt(x, l1.weight, l1.bias), p.activation, tangent);
  const Matrix pre_t1 = tangent ? matmul_nt(v, l1.weight) : Matrix{};
  const Matrix t1 = tangent ? hadamard(a1.d1, pre_t1) : Matrix{};
  const auto a2 = activate(matmul_nt(a1.value, l2.weight, l2.bias), p.activation, tangent);
  const Matrix pre_t2 = tangent ? matmul_nt(t1, l2.weight) : Matrix{};
  const Matrix t2 = tangent ? hadamard(a2.d1, pre_t2) : Matrix{};
  const Matrix y = matmul_nt(a2.value, l3.weight, l3.bias);
  const Matrix u = tangent ? matmul_nt(t2, l3.weight) : Matrix{};

  const std::size_t out_dim = y.cols;
  Matrix gy(n, out_dim);
  Matrix gu(tangent ? n : 0, out_dim);
  double value = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    value += objective(r, y.row(r), tangent ? u.row(r) : std::span<const double>{}, gy.row(r),
                       tangent ? gu.row(r) : std::span<double>{});
  }
  if (!std::isfinite(value)) fail(ErrorCode::Divergence, "non_finite", "objective is not finite");

  ObjectiveGradient out{value, p.zeros_like()};
  auto& [g1, g2, g3] = out.grad.layers;

  // Layer 3.
  accumulate_tn(gy, a2.value, g3.weight);
  add_row_sums(gy, g3.bias);
  if (tangent) accumulate_tn(gu, t2, g3.weight);

  // Into layer 2: cotangents w.r.t. pre-activation a2 and its tangent.
  Matrix g_pre2 = hadamard(a2.d1, matmul_nn(gy, l3.weight));
  Matrix g_pre_t2;
  if (tangent) {
    const Matrix g_t2 = matmul_nn(gu, l3.weight);
    g_pre_t2 = hadamard(a2.d1, g_t2);
    const Matrix curvature = hadamard(hadamard(a2.d2, pre_t2), g_t2);
    for (std::size_t i = 0; i < g_pre2.size(); ++i) g_pre2.data[i] += curvature.data[i];
  }
  accumulate_tn(g_pre2, a1.value, g2.weight);
  add_row_sums(g_pre2, g2.bias);
  if (tangent) accumulate_tn(g_pre_t2, t1, g2.weight);

  // Into layer 1.
  Matrix g_pre1 = hadamard(a1.d1, matmul_nn(g_pre2, l2.weight));
  Matrix g_pre_t1;
  if (tangent) {
    const Matrix g_t1 = matmul_nn(g_pre_t2, l2.weight);
    g_pre_t1 = hadamard(a1.d1, g_t1);
    const Matrix curvature = hadamard(hadamard(a1.d2, pre_t1), g_t1);
    for (std::size_t i = 0; i < g_pre1.size(); ++i) g_pre1.data[i] += curvature.data[i];
  }
  accumulate_tn(g_pre1, x, g1.weight);
  add_row_sums(g_pre1, g1.bias);
  if (tangent) accumulate_tn(g_pre_t1, v, g1.weight);

  if (!out.grad.all_finite()) fail(ErrorCode::Divergence, "non_finite", "gradient is not finite");
  return out;
}

void adam_step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads,
               AdamState& state) {
  if (params.size() != grads.size()) fail(ErrorCode::Data, "shape_mismatch", "adam: block count mismatch");
  std::size_t total = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) fail(ErrorCode::Data, "shape_mismatch", "adam: block size mismatch");
    for (double g : grads[b])
      if (!std::isfinite(g)) fail(ErrorCode::Divergence, "non_finite_gradient", "adam: non-finite gradient");
    total += params[b].size();
  }
  if (total != state.first_moment.size() || total != state.second_moment.size()) {
    fail(ErrorCode::Data, "shape_mismatch", "adam: state size does not match parameters");
  }

  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double lr_t = c.lr * std::sqrt(1.0 - std::pow(c.beta2, t)) / (1.0 - std::pow(c.beta1, t));
  std::size_t offset = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i, ++offset) {
      const double g = grads[b][i];
      double& m = state.first_moment[offset];
      double& s = state.second_moment[offset];
      m = c.beta1 * m + (1.0 - c.beta1) * g;
      s = c.beta2 * s + (1.0 - c.beta2) * g * g;
      params[b][i] -= lr_t * m / (std::sqrt(s) + c.eps_hat);
    }
  }
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  adam_step(std::vector<std::span<double>>{params}, std::vector<std::span<const double>>{grads}, state);
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state) {
  adam_step(params.blocks(), grads.blocks(), state);
}

Vector softmax(std::span<const double> logits) {
  Vector p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    fail(ErrorCode::Data, "label_out_of_range",
         "label " + std::to_string(label) + " outside " + std::to_string(logits.size()) + " classes");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double log_sum = std::log(sum);
  CrossEntropy ce;
  ce.loss = -(logits[label] - mx - log_sum);
  ce.grad_logits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) ce.grad_logits[i] = std::exp(logits[i] - mx - log_sum);
  ce.grad_logits[label] -= 1.0;
  return ce;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::vector<std::uint8_t> encode_mlp(const MlpParams& p) {
  p.validate();
  binary::Writer w;
  w.magic("CLNN");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(p.layers.size()));
  for (const auto& l : p.layers) {
    w.u32(static_cast<std::uint32_t>(l.weight.rows));
    w.u32(static_cast<std::uint32_t>(l.weight.cols));
    for (double v : l.weight.data) w.f64(v);
    for (double v : l.bias) w.f64(v);
  }
  return w.bytes();
}

MlpParams decode_mlp(std::vector<std::uint8_t> bytes, Activation activation) {
  binary::Reader r(std::move(bytes));
  std::string magic;
  std::uint32_t version = 0, count = 0;
  if (!r.magic(magic)) fail(ErrorCode::Data, "truncated", "CLNN header truncated");
  if (magic != "CLNN") fail(ErrorCode::Data, "bad_magic", "not a CLNN checkpoint");
  if (!r.u32(version)) fail(ErrorCode::Data, "truncated", "CLNN header truncated");
  if (version != 1) fail(ErrorCode::Data, "version_mismatch", "unsupported CLNN version " + std::to_string(version));
  if (!r.u32(count)) fail(ErrorCode::Data, "truncated", "CLNN header truncated");
  if (count != 3) fail(ErrorCode::Data, "schema", "CLNN layer count must be 3");
  MlpParams p;
  p.activation = activation;
  for (auto& l : p.layers) {
    std::uint32_t rows = 0, cols = 0;
    if (!r.u32(rows) || !r.u32(cols)) fail(ErrorCode::Data, "truncated", "CLNN layer header truncated");
    if (r.remaining() < (static_cast<std::uint64_t>(rows) * cols + rows) * 8) {
      fail(ErrorCode::Data, "truncated", "CLNN layer payload truncated");
    }
    l.weight = Matrix(rows, cols);
    l.bias.assign(rows, 0.0);
    for (double& v : l.weight.data) r.f64(v);
    for (double& v : l.bias) r.f64(v);
  }
  if (r.remaining() != 0) fail(ErrorCode::Data, "trailing_bytes", "CLNN checkpoint has trailing bytes");
  p.validate();
  return p;
}

void write_mlp(const MlpParams& p, const std::filesystem::path& path) { binary::write_file(path, encode_mlp(p)); }

MlpParams read_mlp(const std::filesystem::path& path, Activation activation) {
  return decode_mlp(binary::read_file(path), activation);
}

}  // namespace clear::nn
