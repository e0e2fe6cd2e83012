// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <filesystem>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "clear/binary.hpp"
#include "clear/error.hpp"
#include "clear/matrix.hpp"
#include "clear/rng.hpp"

namespace test {

inline const nlohmann::json& oracles() {
  static const nlohmann::json doc = nlohmann::json::parse(clear::binary::read_text(CLEAR_ORACLE_PATH));
  return doc;
}

inline clear::Matrix matrix_from(const nlohmann::json& rows) {
  clear::Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) m(r, c) = rows[r][c].get<double>();
  return m;
}

inline clear::Vector vector_from(const nlohmann::json& v) { return v.get<clear::Vector>(); }

inline clear::Matrix random_matrix(std::size_t r, std::size_t c, clear::Rng& rng, double scale = 1.0) {
  clear::Matrix m(r, c);
  for (double& x : m.data) x = scale * rng.normal();
  return m;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("clear_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test

#define CHECK_ERROR(expr, code_, kind_)                         \
  do {                                                          \
    try {                                                       \
      (void)(expr);                                             \
      FAIL_CHECK("expected clear::Error " << kind_);            \
    } catch (const clear::Error& e) {                           \
      CHECK(e.code() == (code_));                               \
      CHECK(e.kind() == std::string(kind_));                    \
    }                                                           \
  } while (0)
