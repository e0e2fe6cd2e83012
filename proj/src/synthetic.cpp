// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include "clear/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "clear/binary.hpp"
#include "clear/error.hpp"
#include "clear/rng.hpp"

namespace clear::synthetic {
namespace {

void normalize(std::span<double> v) {
  const double n = norm(v);
  for (double& x : v) x /= n;
}

Vector random_unit(std::size_t d, Rng& rng) {
  Vector v(d);
  do {
    rng.fill_normal(v);
  } while (norm(v) == 0.0);
  normalize(v);
  return v;
}

// Unit vector at `angle_rad` from unit vector `mu`, in a random direction.
Vector rotate_away(std::span<const double> mu, double angle_rad, Rng& rng) {
  Vector w = random_unit(mu.size(), rng);
  const double proj = dot(w, mu);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= proj * mu[i];
  normalize(w);
  Vector out(mu.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::cos(angle_rad) * mu[i] + std::sin(angle_rad) * w[i];
  normalize(out);
  return out;
}

}  // namespace

double angle_degrees(std::span<const double> a, std::span<const double> b) {
  const double c = std::clamp(dot(a, b) / (norm(a) * norm(b)), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

Fixture make_fixture(const FixtureSpec& spec) {
  const std::size_t planted_total = spec.classes * spec.planted_per_class;
  if (spec.classes == 0 || spec.dim < 2 || spec.images_per_class == 0) {
    fail(ErrorCode::Config, "invalid_config", "fixture: need classes, dim >= 2 and images");
  }
  if (!(spec.mean_cosine >= 0.0 && spec.mean_cosine < 1.0) || (spec.mean_cosine > 0.0 && spec.classes + 1 > spec.dim)) {
    fail(ErrorCode::Config, "invalid_config", "fixture: mean_cosine must lie in [0, 1) and needs dim > classes");
  }
  if (planted_total > spec.descriptors) {
    fail(ErrorCode::Config, "invalid_config", "fixture: more planted descriptors than descriptors");
  }
  Rng rng(derive_seed(spec.seed, 40));
  const std::size_t d = spec.dim;

  Fixture fx;
  fx.class_means = Matrix(spec.classes, d);
  if (spec.mean_cosine == 0.0) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      const Vector mu = random_unit(d, rng);
      std::copy(mu.begin(), mu.end(), fx.class_means.row(c).begin());
    }
  } else {
    // mu_c = sqrt(rho) u0 + sqrt(1 - rho) r_c over an orthonormal set
    // {u0, r_1..r_C}: every pair of means has cosine exactly rho.
    Matrix basis(spec.classes + 1, d);
    for (std::size_t b = 0; b < basis.rows; ++b) {
      auto row = basis.row(b);
      const Vector v = random_unit(d, rng);
      std::copy(v.begin(), v.end(), row.begin());
      for (std::size_t a = 0; a < b; ++a) {
        const double p = dot(row, basis.row(a));
        for (std::size_t j = 0; j < d; ++j) row[j] -= p * basis(a, j);
      }
      normalize(row);
    }
    const double shared = std::sqrt(spec.mean_cosine), own = std::sqrt(1.0 - spec.mean_cosine);
    for (std::size_t c = 0; c < spec.classes; ++c)
      for (std::size_t j = 0; j < d; ++j) fx.class_means(c, j) = shared * basis(0, j) + own * basis(c + 1, j);
  }
  for (std::size_t c = 0; c < spec.classes; ++c) fx.manifest.classes.push_back("class_" + std::to_string(c));

  // Images: normalize(mu_c + noise), noise ~ N(0, (image_noise^2 / d) I).
  const std::size_t n_images = spec.classes * spec.images_per_class;
  Matrix images(n_images, d);
  const double sigma = spec.image_noise / std::sqrt(static_cast<double>(d));
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < spec.images_per_class; ++i) {
      const std::size_t r = c * spec.images_per_class + i;
      auto row = images.row(r);
      for (std::size_t j = 0; j < d; ++j) row[j] = fx.class_means(c, j) + sigma * rng.normal();
      normalize(row);
      fx.manifest.items.push_back({"img_" + std::to_string(r), c, io::Split::Train});
    }
  }
  std::vector<std::size_t> perm(n_images);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n_images)));
  const auto n_val = static_cast<std::size_t>(std::llround(spec.val_fraction * static_cast<double>(n_images)));
  for (std::size_t p = 0; p < n_images; ++p) {
    fx.manifest.items[perm[p]].split = p < n_train ? io::Split::Train : p < n_train + n_val ? io::Split::Val : io::Split::Test;
  }

  // Descriptors: planted ones first in construction order, then a seeded
  // shuffle of pool positions.
  Matrix pool(spec.descriptors, d);
  std::vector<io::Descriptor> descs;
  std::vector<std::size_t> planted_of(spec.descriptors, SIZE_MAX);
  const double deg = std::numbers::pi / 180.0;
  for (std::size_t q = 0; q < spec.descriptors; ++q) {
    Vector v;
    std::size_t owner = q % spec.classes;
    if (q < planted_total) {
      owner = q / spec.planted_per_class;
      const double angle =
          deg * (spec.planted_min_angle_deg + (spec.planted_max_angle_deg - spec.planted_min_angle_deg) * rng.uniform());
      v = rotate_away(fx.class_means.row(owner), angle, rng);
      planted_of[q] = owner;
      descs.push_back({"class_" + std::to_string(owner) + " trait " + std::to_string(q % spec.planted_per_class), {owner}});
    } else {
      v = random_unit(d, rng);
      descs.push_back({"distractor " + std::to_string(q - planted_total), {owner}});
    }
    std::copy(v.begin(), v.end(), pool.row(q).begin());
  }
  std::vector<std::size_t> order(spec.descriptors);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  Matrix shuffled(spec.descriptors, d);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t q = order[pos];
    std::copy(pool.row(q).begin(), pool.row(q).end(), shuffled.row(pos).begin());
    fx.manifest.descriptors.push_back(descs[q]);
    if (planted_of[q] != SIZE_MAX) {
      fx.planted.push_back(pos);
      fx.planted_class.push_back(planted_of[q]);
    }
  }

  fx.images = io::EmbeddingSet::from_matrix(images);
  fx.descriptors = io::EmbeddingSet::from_matrix(shuffled);
  return fx;
}

void write_fixture(const Fixture& fx, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_embeddings(fx.images, dir / "images.cleb");
  io::write_embeddings(fx.descriptors, dir / "descriptors.cleb");
  io::DatasetManifest m = fx.manifest;
  m.image_embeddings = "images.cleb";
  m.descriptor_embeddings = "descriptors.cleb";
  binary::write_text(dir / "manifest.json", io::manifest_to_json(m));

  nlohmann::json truth;
  truth["planted"] = fx.planted;
  truth["planted_class"] = fx.planted_class;
  truth["class_means"] = nlohmann::json::array();
  for (std::size_t c = 0; c < fx.class_means.rows; ++c) {
    const auto row = fx.class_means.row(c);
    truth["class_means"].push_back(std::vector<double>(row.begin(), row.end()));
  }
  binary::write_text(dir / "truth.json", truth.dump(2) + "\n");
}

}  // namespace clear::synthetic
