// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "clear/error.hpp"
#include "clear/simd.hpp"

namespace clear::simd {

#ifndef CLEAR_HAVE_AVX2
namespace detail {
const KernelTable* avx2_table_if_compiled() { return nullptr; }
}  // namespace detail
#endif

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const KernelTable* avx2 = avx2_kernels();
  if (const char* env = std::getenv("CLEAR_SIMD")) {
    if (std::string_view(env) == "scalar") return &scalar_kernels();
  }
  return avx2 != nullptr ? avx2 : &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const KernelTable* table = cpu_has_avx2() ? detail::avx2_table_if_compiled() : nullptr;
  return table;
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

Backend active_backend() { return &active() == &scalar_kernels() ? Backend::Scalar : Backend::Avx2; }

const char* active_backend_name() { return active().name; }

void set_backend(Backend backend) {
  if (backend == Backend::Scalar) {
    current().store(&scalar_kernels());
    return;
  }
  const KernelTable* avx2 = avx2_kernels();
  if (avx2 == nullptr) fail(ErrorCode::Config, "simd_unavailable", "AVX2 backend not available on this build/CPU");
  current().store(avx2);
}

}  // namespace clear::simd
