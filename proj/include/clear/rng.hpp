// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace clear {

// Seedable generator with fully specified distributions. The engine is
// std::mt19937_64 (its output sequence is fixed by the standard); the
// distributions are implemented here because the std:: ones are
// implementation-defined and would break cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

  // +1 or -1 with equal probability.
  double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

  void fill_normal(std::span<double> out);

  void shuffle(std::vector<std::size_t>& v);

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

// Stable per-stream seed derivation: derive_seed(seed, j) depends only on
// (seed, j), so stream j is the same regardless of how many streams exist.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace clear
