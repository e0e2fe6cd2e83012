// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace clear {

using Vector = std::vector<double>;

// Dense row-major f64 matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix identity(std::size_t n, double scale = 1.0) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

Matrix transpose(const Matrix& m);

// C = A * B^T (+ bias broadcast over rows). A: n x p, B: m x p -> n x m.
Matrix matmul_nt(const Matrix& a, const Matrix& b, std::span<const double> bias = {});
// C = A * B. A: n x m, B: m x p -> n x p.
Matrix matmul_nn(const Matrix& a, const Matrix& b);
// C += A^T * B. A: n x m, B: n x p -> m x p. Summation over n runs in index order.
void accumulate_tn(const Matrix& a, const Matrix& b, Matrix& c);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

}  // namespace clear
