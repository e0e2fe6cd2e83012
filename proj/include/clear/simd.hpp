// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <cstddef>

// Dense f64 inner-loop kernels. Each kernel has a scalar reference
// implementation and, on x86-64, an AVX2/FMA variant; the variant is chosen
// once at startup from CPUID (override with CLEAR_SIMD=scalar|avx2).
// Variants agree to rounding, not bitwise; a given backend is deterministic.
namespace clear::simd {

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  const char* name;
};

const KernelTable& scalar_kernels();
// nullptr when the variant was not compiled in or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

Backend active_backend();
const char* active_backend_name();
// Throws clear::Error (config) if the requested backend is unavailable.
void set_backend(Backend backend);

const KernelTable& active();

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }
inline double squared_distance(const double* a, const double* b, std::size_t n) {
  return active().squared_distance(a, b, n);
}

namespace detail {
const KernelTable* avx2_table_if_compiled();
}

}  // namespace clear::simd
