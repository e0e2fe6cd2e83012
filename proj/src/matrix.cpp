// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include "clear/matrix.hpp"

#include <cmath>

#include "clear/parallel.hpp"
#include "clear/simd.hpp"

namespace clear {

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) t(c, r) = m(r, c);
  return t;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b, std::span<const double> bias) {
  assert(a.cols == b.cols);
  assert(bias.empty() || bias.size() == b.rows);
  Matrix c(a.rows, b.rows);
  const std::size_t p = a.cols;
  parallel_for(a.rows, b.rows * p, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double* ai = a.data.data() + i * p;
      double* ci = c.data.data() + i * c.cols;
      for (std::size_t j = 0; j < b.rows; ++j) {
        const double v = simd::dot(ai, b.data.data() + j * p, p);
        ci[j] = bias.empty() ? v : v + bias[j];
      }
    }
  });
  return c;
}

Matrix matmul_nn(const Matrix& a, const Matrix& b) {
  assert(a.cols == b.rows);
  Matrix c(a.rows, b.cols);
  parallel_for(a.rows, a.cols * b.cols, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double* ci = c.data.data() + i * c.cols;
      for (std::size_t k = 0; k < a.cols; ++k) {
        const double aik = a(i, k);
        if (aik != 0.0) simd::axpy(aik, b.data.data() + k * b.cols, ci, b.cols);
      }
    }
  });
  return c;
}

void accumulate_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
  parallel_for(a.cols, a.rows * b.cols, [&](std::size_t begin, std::size_t end) {
    for (std::size_t o = begin; o < end; ++o) {
      double* co = c.data.data() + o * c.cols;
      for (std::size_t i = 0; i < a.rows; ++i) {
        const double aio = a(i, o);
        if (aio != 0.0) simd::axpy(aio, b.data.data() + i * b.cols, co, b.cols);
      }
    }
  });
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return simd::dot(a.data(), b.data(), a.size());
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace clear
