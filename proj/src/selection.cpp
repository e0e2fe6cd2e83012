// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include "clear/selection.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <set>

#include "clear/error.hpp"
#include "clear/rng.hpp"
#include "clear/simd.hpp"

namespace clear::selection {
namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
// Reduced costs within this of zero count as tight when breaking ties.
constexpr double kTightTolerance = 1e-10;

Matrix unit_rows(const Matrix& m, const char* what) {
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double n = norm(m.row(r));
    if (n == 0.0) fail(ErrorCode::Data, "zero_norm", std::string(what) + " row " + std::to_string(r) + " is zero");
    for (double& v : out.row(r)) v /= n;
  }
  return out;
}

struct Duals {
  std::vector<double> u;  // rows
  std::vector<double> v;  // columns
};

// Rectangular Hungarian (rows <= cols) by successive shortest augmenting
// paths with potentials. Returns col -> row (kNone when unmatched).
std::vector<std::size_t> hungarian_min(const Matrix& cost, Duals& duals) {
  const std::size_t n = cost.rows;
  const std::size_t m = cost.cols;
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based workspace; index 0 is the virtual source column.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> owner(m, kNone);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) owner[j - 1] = p[j] - 1;
  duals.u.assign(u.begin() + 1, u.end());
  duals.v.assign(v.begin() + 1, v.end());
  return owner;
}

// Rewrites an optimal matching into the lexicographically smallest optimal
// one. An assignment is optimal iff it uses only tight edges and covers
// every column with negative dual; unmatched columns are modelled as owned
// by interchangeable zero-cost dummy rows.
class LexicographicRefiner {
 public:
  LexicographicRefiner(const Matrix& cost, const Duals& duals, std::vector<std::size_t> owner)
      : cost_(cost), duals_(duals), owner_(std::move(owner)), match_(cost.rows, kNone), fixed_(cost.rows, 0) {
    for (std::size_t j = 0; j < owner_.size(); ++j)
      if (owner_[j] != kNone) match_[owner_[j]] = j;
  }

  std::vector<std::size_t> run() {
    for (std::size_t i = 0; i < cost_.rows; ++i) {
      for (std::size_t c = 0; c < cost_.cols; ++c) {
        if (!tight(i, c)) continue;
        if (c == match_[i] || try_move(i, c)) break;
      }
      fixed_[i] = 1;
    }
    return match_;
  }

 private:
  static constexpr std::size_t kDummy = kNone - 1;

  bool tight(std::size_t i, std::size_t j) const {
    return cost_(i, j) - duals_.u[i] - duals_.v[j] <= kTightTolerance;
  }
  bool required(std::size_t j) const { return duals_.v[j] < -kTightTolerance; }

  // Row i (not yet fixed) moves to column c; searches an alternating path
  // that rehouses c's current owner and ends by absorbing i's old column.
  bool try_move(std::size_t i, std::size_t c) {
    const std::size_t old = match_[i];
    const std::size_t start = owner_[c] == kNone ? kDummy : owner_[c];
    if (start != kDummy && fixed_[start]) return false;

    struct Step {
      std::size_t prev;
      std::size_t col;
    };
    std::vector<Step> parent_real(cost_.rows, Step{kNone, kNone});
    Step parent_dummy{kNone, kNone};
    std::vector<char> seen_real(cost_.rows, 0);
    bool seen_dummy = false;
    std::deque<std::size_t> queue;
    auto visit = [&](std::size_t node, Step via) {
      if (node == kDummy) {
        if (seen_dummy) return;
        seen_dummy = true;
        parent_dummy = via;
      } else {
        if (seen_real[node] || fixed_[node] || node == i) return;
        seen_real[node] = 1;
        parent_real[node] = via;
      }
      queue.push_back(node);
    };
    visit(start, Step{kNone, kNone});

    std::size_t terminal = kNone;
    while (!queue.empty() && terminal == kNone) {
      const std::size_t x = queue.front();
      queue.pop_front();
      for (std::size_t y = 0; y < cost_.cols; ++y) {
        if (y == c) continue;
        const bool can_take = x == kDummy ? !required(y) : tight(x, y);
        if (!can_take) continue;
        if (y == old) {
          terminal = x;
          break;
        }
        const std::size_t z = owner_[y] == kNone ? kDummy : owner_[y];
        if (x == kDummy && z == kDummy) continue;
        visit(z, Step{x, y});
      }
    }
    if (terminal == kNone) return false;

    // Unwind: each node on the path takes the column that led to its successor.
    std::size_t node = terminal;
    std::size_t col = old;
    for (;;) {
      take(node, col);
      const Step s = node == kDummy ? parent_dummy : parent_real[node];
      if (s.prev == kNone) break;
      node = s.prev;
      col = s.col;
    }
    match_[i] = c;
    owner_[c] = i;
    return true;
  }

  void take(std::size_t node, std::size_t col) {
    if (node == kDummy) {
      owner_[col] = kNone;
    } else {
      match_[node] = col;
      owner_[col] = node;
    }
  }

  const Matrix& cost_;
  const Duals& duals_;
  std::vector<std::size_t> owner_;
  std::vector<std::size_t> match_;
  std::vector<char> fixed_;
};

}  // namespace

SimilarityMatrix similarity_matrix(const Matrix& concepts, const Matrix& pool) {
  if (concepts.cols != pool.cols) fail(ErrorCode::Data, "dim_mismatch", "similarity: concept/pool widths differ");
  SimilarityMatrix sim;
  sim.values = matmul_nt(unit_rows(concepts, "concept"), unit_rows(pool, "pool"));
  for (double& v : sim.values.data) v = std::clamp(v, -1.0, 1.0);
  sim.row_ids.resize(concepts.rows);
  std::iota(sim.row_ids.begin(), sim.row_ids.end(), 0);
  sim.col_ids.resize(pool.rows);
  std::iota(sim.col_ids.begin(), sim.col_ids.end(), 0);
  return sim;
}

std::vector<std::size_t> top_m_columns(std::span<const double> row, std::size_t m) {
  std::vector<std::size_t> idx(row.size());
  std::iota(idx.begin(), idx.end(), 0);
  m = std::min(m, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(),
                    [&](std::size_t a, std::size_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
  idx.resize(m);
  return idx;
}

FilterResult top_m_filter(const SimilarityMatrix& sim, std::size_t k, std::size_t m0) {
  if (m0 == 0) fail(ErrorCode::Config, "invalid_config", "top-m filter: m0 must be >= 1");
  const std::size_t cols = sim.values.cols;
  FilterResult out;
  if (cols <= k) {
    out.filtered = sim;
    out.skipped = true;
    return out;
  }
  std::size_t m = m0;
  std::set<std::size_t> top_des;
  for (;;) {
    top_des.clear();
    for (std::size_t r = 0; r < sim.values.rows; ++r)
      for (std::size_t c : top_m_columns(sim.values.row(r), m)) top_des.insert(c);
    if (top_des.size() > k || m >= cols) break;
    m *= 2;
  }
  out.m = m;
  out.filtered.row_ids = sim.row_ids;
  out.filtered.values = Matrix(sim.values.rows, top_des.size());
  std::size_t out_col = 0;
  for (std::size_t c : top_des) {
    out.filtered.col_ids.push_back(sim.col_ids[c]);
    for (std::size_t r = 0; r < sim.values.rows; ++r) out.filtered.values(r, out_col) = sim.values(r, c);
    ++out_col;
  }
  return out;
}

std::vector<std::size_t> solve_max_assignment(const Matrix& sim) {
  if (sim.cols < sim.rows) {
    fail(ErrorCode::Infeasible, "infeasible",
         "assignment needs at least as many candidates (" + std::to_string(sim.cols) + ") as concepts (" +
             std::to_string(sim.rows) + ")");
  }
  if (sim.rows == 0) return {};
  const double top = *std::max_element(sim.data.begin(), sim.data.end());
  Matrix cost(sim.rows, sim.cols);
  for (std::size_t i = 0; i < sim.size(); ++i) cost.data[i] = top - sim.data[i];
  Duals duals;
  auto owner = hungarian_min(cost, duals);
  return LexicographicRefiner(cost, duals, std::move(owner)).run();
}

Assignment assign(const SimilarityMatrix& sim) {
  const auto cols = solve_max_assignment(sim.values);
  Assignment a;
  for (std::size_t r = 0; r < cols.size(); ++r) {
    const double s = sim.values(r, cols[r]);
    a.pairs.emplace_back(sim.row_ids[r], sim.col_ids[cols[r]]);
    a.similarities.push_back(s);
    a.total_similarity += s;
  }
  return a;
}

std::vector<std::size_t> select_nn(const Matrix& concepts, const Matrix& pool) {
  if (concepts.cols != pool.cols) fail(ErrorCode::Data, "dim_mismatch", "nn selection: widths differ");
  if (pool.rows == 0) fail(ErrorCode::Infeasible, "pool_too_small", "nn selection: empty pool");
  std::vector<std::size_t> out(concepts.rows);
  for (std::size_t r = 0; r < concepts.rows; ++r) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < pool.rows; ++h) {
      const double d = simd::squared_distance(concepts.row(r).data(), pool.row(h).data(), pool.cols);
      if (d < best) {
        best = d;
        out[r] = h;
      }
    }
  }
  return out;
}

std::vector<std::size_t> select_random(std::size_t pool_size, std::size_t k, std::uint64_t seed) {
  if (k > pool_size) {
    fail(ErrorCode::Infeasible, "pool_too_small",
         "random selection of " + std::to_string(k) + " from a pool of " + std::to_string(pool_size));
  }
  Rng rng(derive_seed(seed, 20));
  std::vector<std::size_t> idx(pool_size);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool_size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

Assignment assignment_from_ids(const SimilarityMatrix& full, const std::vector<std::size_t>& ids) {
  Assignment a;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto it = std::find(full.col_ids.begin(), full.col_ids.end(), ids[r]);
    if (it == full.col_ids.end()) fail(ErrorCode::Data, "dangling_index", "selected id not in similarity matrix");
    const double s = full.values(r, static_cast<std::size_t>(it - full.col_ids.begin()));
    a.pairs.emplace_back(full.row_ids[r], ids[r]);
    a.similarities.push_back(s);
    a.total_similarity += s;
  }
  return a;
}

double deduplicated_total(const SimilarityMatrix& full, const std::vector<std::size_t>& ids) {
  const Assignment a = assignment_from_ids(full, ids);
  std::vector<std::pair<std::size_t, double>> best;
  for (std::size_t r = 0; r < a.pairs.size(); ++r) {
    const std::size_t col = a.pairs[r].second;
    auto it = std::find_if(best.begin(), best.end(), [&](const auto& b) { return b.first == col; });
    if (it == best.end()) {
      best.emplace_back(col, a.similarities[r]);
    } else {
      it->second = std::max(it->second, a.similarities[r]);
    }
  }
  double total = 0.0;
  for (const auto& b : best) total += b.second;
  return total;
}

SelectedBottleneck build_selected(const io::EmbeddingSet& pool, const io::DatasetManifest& manifest,
                                  const std::vector<std::size_t>& pool_ids) {
  SelectedBottleneck out;
  out.concepts = Matrix(pool_ids.size(), pool.dim);
  for (std::size_t i = 0; i < pool_ids.size(); ++i) {
    const std::size_t id = pool_ids[i];
    if (id >= pool.rows || id >= manifest.descriptors.size()) {
      fail(ErrorCode::Data, "dangling_index", "selected descriptor id " + std::to_string(id) + " is outside the pool");
    }
    const auto src = pool.row(id);
    for (std::size_t c = 0; c < pool.dim; ++c) out.concepts(i, c) = static_cast<double>(src[c]);
    out.texts.push_back(manifest.descriptors[id].text);
  }
  out.pool_ids = pool_ids;
  return out;
}

}  // namespace clear::selection
