// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clear/io.hpp"
#include "clear/matrix.hpp"

// Concept selection: cosine similarity between learned concepts and the
// descriptor pool, top-m pool filtering, and an optimal one-to-one
// assignment (plus nearest-neighbour and random baselines).
namespace clear::selection {

struct SimilarityMatrix {
  Matrix values;                      // rows: learned concepts, cols: pool candidates
  std::vector<std::size_t> row_ids;   // learned-embedding indices
  std::vector<std::size_t> col_ids;   // descriptor-pool indices
};

// values(i, j) = cosine(concepts row i, pool row j). Throws Data/"zero_norm"
// on a zero operand and Data/"dim_mismatch" on differing widths.
SimilarityMatrix similarity_matrix(const Matrix& concepts, const Matrix& pool);

struct FilterResult {
  SimilarityMatrix filtered;
  std::size_t m = 0;        // final m of the doubling sequence (0 when skipped)
  bool skipped = false;     // pool size <= k: full pool kept
};

// TopDes = union over rows of each row's m most similar columns; m doubles
// from m0 until |TopDes| > k. Columns keep ascending pool order. Ties in a
// row's ranking go to the lower column.
FilterResult top_m_filter(const SimilarityMatrix& sim, std::size_t k, std::size_t m0 = 5);

// The m highest columns of one row (descending value, lower index on ties).
std::vector<std::size_t> top_m_columns(std::span<const double> row, std::size_t m);

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row-id, col-id) in row order
  std::vector<double> similarities;                        // per pair
  double total_similarity = 0.0;
};

// Maximum-similarity injective assignment of every row to a column
// (cost = max(sim) - sim, rectangular shortest-augmenting-path Hungarian,
// O(rows^2 * cols)). Among optimal assignments the lexicographically
// smallest column sequence is returned. Throws Infeasible/"infeasible" when
// there are fewer columns than rows.
Assignment assign(const SimilarityMatrix& sim);

// Column index per row of a raw rows x cols matrix; the building block of
// assign(), exposed for the brute-force oracle tests.
std::vector<std::size_t> solve_max_assignment(const Matrix& sim);

// Per-concept nearest pool row by L2 distance (duplicates allowed, lowest
// index on ties).
std::vector<std::size_t> select_nn(const Matrix& concepts, const Matrix& pool);

// k distinct pool indices, uniform without replacement. Throws
// Infeasible/"pool_too_small" when k > pool size.
std::vector<std::size_t> select_random(std::size_t pool_size, std::size_t k, std::uint64_t seed);

// Turns an id list into an Assignment against a full-pool similarity
// matrix (ids may repeat; total counts every pair).
Assignment assignment_from_ids(const SimilarityMatrix& full, const std::vector<std::size_t>& ids);

// Sum of similarities of distinct chosen columns, each column counted once
// with the best row that chose it.
double deduplicated_total(const SimilarityMatrix& full, const std::vector<std::size_t>& ids);

struct SelectedBottleneck {
  Matrix concepts;                 // k x d, row i = pool row of the i-th chosen descriptor
  std::vector<std::string> texts;  // aligned with rows
  std::vector<std::size_t> pool_ids;
};

// Throws Data/"dangling_index" for ids outside the pool.
SelectedBottleneck build_selected(const io::EmbeddingSet& pool, const io::DatasetManifest& manifest,
                                  const std::vector<std::size_t>& pool_ids);

}  // namespace clear::selection
