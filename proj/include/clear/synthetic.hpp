// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "clear/io.hpp"

// Seeded synthetic corpora with a known answer: images cluster around
// class means and a few descriptors per class are planted close to their
// class mean, the rest point in random directions.
namespace clear::synthetic {

struct FixtureSpec {
  std::size_t dim = 32;
  std::size_t classes = 5;
  std::size_t images_per_class = 500;
  std::size_t descriptors = 50;
  std::size_t planted_per_class = 2;
  double image_noise = 0.5;          // expected norm of the pre-normalisation noise
  double mean_cosine = 0.3;          // pairwise cosine of the class means (0: independent random means)
  double planted_min_angle_deg = 3.0;
  double planted_max_angle_deg = 14.0;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct Fixture {
  io::DatasetManifest manifest;
  io::EmbeddingSet images;
  io::EmbeddingSet descriptors;
  Matrix class_means;                     // classes x dim, unit rows
  std::vector<std::size_t> planted;       // pool indices of planted descriptors
  std::vector<std::size_t> planted_class; // owning class per planted entry
};

Fixture make_fixture(const FixtureSpec& spec);

// Writes manifest.json (referencing images.cleb and descriptors.cleb) and
// truth.json with the planted ids and class means.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

double angle_degrees(std::span<const double> a, std::span<const double> b);

}  // namespace clear::synthetic
