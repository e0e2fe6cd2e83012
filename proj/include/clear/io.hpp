// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clear/matrix.hpp"

namespace clear::io {

inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr double kUnitNormTolerance = 1e-4;

// Row-major f32 embedding matrix as stored in a CLEB file.
//
// CLEB layout (little-endian): "CLEB", u32 version = 1, u32 rows, u32 dim,
// rows*dim f32 values.
struct EmbeddingSet {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  bool normalized = false;

  std::span<const float> row(std::size_t r) const { return {data.data() + r * dim, dim}; }

  // Up-cast to the f64 working precision.
  Matrix to_matrix() const;
  static EmbeddingSet from_matrix(const Matrix& m);

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;
};

// True when every row's L2 norm is within kUnitNormTolerance of 1.
bool rows_unit_norm(const EmbeddingSet& set);

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_embeddings(const EmbeddingSet& set);

// Errors (ErrorCode::Data) with kinds: "io_error", "bad_magic",
// "version_mismatch", "truncated", "non_finite".
EmbeddingSet read_embeddings(const std::filesystem::path& path);
EmbeddingSet decode_embeddings(std::vector<std::uint8_t> bytes);

// Scales every row to unit L2 norm. Throws Data/"zero_norm" on a zero row.
EmbeddingSet normalize_rows(const EmbeddingSet& set);

enum class Split { Train, Val, Test };
const char* to_string(Split s);

struct Item {
  std::string id;
  std::size_t label = 0;
  Split split = Split::Train;
};

struct Descriptor {
  std::string text;
  // Owning classes; the first entry is the primary class. Texts shared by
  // several classes appear once with several links.
  std::vector<std::size_t> classes;
};

struct DatasetManifest {
  std::vector<std::string> classes;
  std::vector<Item> items;
  std::vector<Descriptor> descriptors;
  // Optional CLEB references, resolved relative to the manifest's directory.
  std::optional<std::filesystem::path> image_embeddings;
  std::optional<std::filesystem::path> descriptor_embeddings;

  std::vector<std::size_t> split_indices(Split s) const;
  std::vector<std::size_t> labels() const;
  // The per-class attribute set: descriptor indices linked to class c.
  std::vector<std::size_t> descriptors_for_class(std::size_t c) const;
  std::optional<std::size_t> find_item(const std::string& id) const;
};

// Errors (ErrorCode::Data): "io_error", "schema", "dangling_index",
// "duplicate_descriptor", "duplicate_item".
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir = {});
std::string manifest_to_json(const DatasetManifest& manifest);

// Collapses internal whitespace runs to one space and trims the ends.
std::string normalize_whitespace(const std::string& text);

// Manifest plus both embedding sets, cross-validated and row-normalized.
struct Corpus {
  DatasetManifest manifest;
  EmbeddingSet images;
  EmbeddingSet descriptors;
};

Corpus load_corpus(const std::filesystem::path& manifest_path,
                   std::optional<std::filesystem::path> images_path = std::nullopt,
                   std::optional<std::filesystem::path> descriptors_path = std::nullopt);

}  // namespace clear::io
