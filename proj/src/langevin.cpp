// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include "clear/langevin.hpp"

#include <cmath>
#include <vector>

#include "clear/error.hpp"

namespace clear::langevin {
namespace {

void check_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    fail(ErrorCode::Config, "invalid_config", "langevin: eps must be a finite value > 0");
  }
}

// In-place update of one point given its score; shared by the single and
// batched paths so both produce identical bits.
void apply_update(std::span<double> x, std::span<const double> s, double eps, Rng& rng) {
  const double half_eps = 0.5 * eps;
  const double noise_scale = std::sqrt(eps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = rng.normal();
    x[i] = x[i] + half_eps * s[i] + noise_scale * z;
    if (!std::isfinite(x[i])) fail(ErrorCode::Divergence, "non_finite", "langevin: update produced a non-finite value");
  }
}

}  // namespace

void LangevinConfig::validate() const { check_eps(eps); }

Vector langevin_step(std::span<const double> x, const score::ScoreNet& net, double eps, Rng& rng) {
  check_eps(eps);
  Vector out(x.begin(), x.end());
  const Vector s = score::score(net, x);
  apply_update(out, s, eps, rng);
  return out;
}

Vector langevin_chain(std::span<const double> x0, const score::ScoreNet& net, double eps, std::size_t steps,
                      Rng& rng) {
  check_eps(eps);
  Vector x(x0.begin(), x0.end());
  for (std::size_t i = 0; i < steps; ++i) x = langevin_step(x, net, eps, rng);
  return x;
}

Vector langevin_chain(std::span<const double> x0, const score::ScoreNet& net, const LangevinConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0));
  return langevin_chain(x0, net, cfg.eps, cfg.steps, rng);
}

Matrix batch_chain(const Matrix& points, const score::ScoreNet& net, const LangevinConfig& cfg,
                   std::span<const std::uint64_t> ids) {
  cfg.validate();
  if (!ids.empty() && ids.size() != points.rows) {
    fail(ErrorCode::Data, "shape_mismatch", "langevin: id count differs from point count");
  }
  std::vector<Rng> streams;
  streams.reserve(points.rows);
  for (std::size_t j = 0; j < points.rows; ++j) {
    streams.emplace_back(derive_seed(cfg.seed, ids.empty() ? j : ids[j]));
  }
  Matrix x = points;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const Matrix s = score::score_batch(net, x);
    for (std::size_t j = 0; j < x.rows; ++j) apply_update(x.row(j), s.row(j), cfg.eps, streams[j]);
  }
  return x;
}

}  // namespace clear::langevin
