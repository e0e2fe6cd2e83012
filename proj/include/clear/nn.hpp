// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "clear/matrix.hpp"
#include "clear/rng.hpp"

// Numeric substrate: a fixed 3-layer MLP with forward, input-directional
// derivative (JVP) and exact parameter gradients of objectives built from
// both; Adam; softmax cross-entropy.
namespace clear::nn {

enum class Activation { Softplus, Identity };
const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct MlpParams {
  std::array<Layer, 3> layers;
  Activation activation = Activation::Softplus;

  static MlpParams zeros(std::size_t in, std::size_t hidden, std::size_t out, Activation act);
  // Weights and biases uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  static MlpParams random(std::size_t in, std::size_t hidden, std::size_t out, Activation act, Rng& rng);

  std::size_t input_dim() const { return layers[0].weight.cols; }
  std::size_t hidden_dim() const { return layers[0].weight.rows; }
  std::size_t output_dim() const { return layers[2].weight.rows; }
  std::size_t parameter_count() const;

  MlpParams zeros_like() const;
  // Weight and bias buffers in layer order: W1, b1, W2, b2, W3, b3.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;

  bool all_finite() const;
  // Throws Data/"shape_mismatch" or Data/"non_finite".
  void validate() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

Vector mlp_forward(const MlpParams& params, std::span<const double> x);
Matrix mlp_forward_batch(const MlpParams& params, const Matrix& x);

// J_f(x) * v, the exact directional derivative of the forward map.
Vector mlp_jvp(const MlpParams& params, std::span<const double> x, std::span<const double> v);

struct ForwardJvp {
  Matrix value;    // f(x) per row
  Matrix tangent;  // J_f(x) v per row
};
ForwardJvp mlp_forward_jvp_batch(const MlpParams& params, const Matrix& x, const Matrix& v);

// Per-row objective term. Given y = f(x_row) and u = J_f(x_row) v_row,
// returns the term's value and writes dterm/dy and dterm/du.
using RowObjective = std::function<double(std::size_t row, std::span<const double> y, std::span<const double> u,
                                          std::span<double> grad_y, std::span<double> grad_u)>;

struct ObjectiveGradient {
  double value = 0.0;
  MlpParams grad;
};

// Exact gradient w.r.t. all parameters of sum_row objective(row, f(x), J_f(x) v),
// by reverse accumulation through the augmented (value, tangent) forward pass.
// `v` may be empty (0 rows), in which case the tangent path is skipped and u
// is passed as an empty span. Throws Divergence/"non_finite" on a non-finite
// value or gradient.
ObjectiveGradient grad_objective(const MlpParams& params, const Matrix& x, const Matrix& v,
                                 const RowObjective& objective);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t parameter_count, AdamConfig cfg)
      : config(cfg), first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0) {}
};

// Adam with the folded bias correction:
//   lr_t = lr * sqrt(1 - beta2^t) / (1 - beta1^t),  theta -= lr_t * m / (sqrt(v) + eps_hat).
// Blocks are treated as one flat parameter vector in the given order.
void adam_step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads,
               AdamState& state);
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state);

struct CrossEntropy {
  double loss = 0.0;
  Vector grad_logits;
};

Vector softmax(std::span<const double> logits);
// loss = -log softmax(logits)[label]; grad = softmax - onehot(label).
CrossEntropy softmax_cross_entropy(std::span<const double> logits, std::size_t label);

// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

// CLNN checkpoint: "CLNN", u32 version = 1, u32 layer count = 3, then per
// layer u32 rows, u32 cols, rows*cols f64 weights (row-major), rows f64 biases.
std::vector<std::uint8_t> encode_mlp(const MlpParams& params);
MlpParams decode_mlp(std::vector<std::uint8_t> bytes, Activation activation);
void write_mlp(const MlpParams& params, const std::filesystem::path& path);
MlpParams read_mlp(const std::filesystem::path& path, Activation activation);

}  // namespace clear::nn
