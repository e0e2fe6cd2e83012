// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <cstdint>
#include <span>

#include "clear/matrix.hpp"
#include "clear/rng.hpp"
#include "clear/score.hpp"

// Unadjusted Langevin updates driven by a learned score:
//   x' = x + (eps / 2) * s(x) + sqrt(eps) * z,   z ~ N(0, I).
// (The eps * s, sqrt(2 eps) form is the same update with eps halved.)
namespace clear::langevin {

struct LangevinConfig {
  double eps = 0.1;
  // Number of updates applied; 0 leaves the input unchanged.
  std::size_t steps = 1;
  std::uint64_t seed = 0;

  // Throws Config/"invalid_config" unless eps > 0 and finite.
  void validate() const;
};

// One update drawing x.size() fresh normals from `rng`. Throws
// Divergence/"non_finite" if the result is not finite.
Vector langevin_step(std::span<const double> x, const score::ScoreNet& net, double eps, Rng& rng);

Vector langevin_chain(std::span<const double> x0, const score::ScoreNet& net, double eps, std::size_t steps, Rng& rng);
// Uses stream 0 of cfg.seed, i.e. Rng(derive_seed(cfg.seed, 0)); matches
// row 0 of batch_chain.
Vector langevin_chain(std::span<const double> x0, const score::ScoreNet& net, const LangevinConfig& cfg);

// Independent chains for each row of `points` (k x d; rows are the concept
// columns). Row j draws its noise from Rng(derive_seed(cfg.seed, ids[j])),
// where ids defaults to 0..k-1, so a chain's result does not depend on k or
// on the other rows.
Matrix batch_chain(const Matrix& points, const score::ScoreNet& net, const LangevinConfig& cfg,
                   std::span<const std::uint64_t> ids = {});

}  // namespace clear::langevin
