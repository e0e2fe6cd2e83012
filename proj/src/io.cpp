// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include "clear/io.hpp"

#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "clear/binary.hpp"
#include "clear/error.hpp"

namespace clear::io {

using nlohmann::json;

Matrix EmbeddingSet::to_matrix() const {
  Matrix m(rows, dim);
  for (std::size_t i = 0; i < data.size(); ++i) m.data[i] = static_cast<double>(data[i]);
  return m;
}

EmbeddingSet EmbeddingSet::from_matrix(const Matrix& m) {
  EmbeddingSet set;
  set.rows = m.rows;
  set.dim = m.cols;
  set.data.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) set.data[i] = static_cast<float>(m.data[i]);
  set.normalized = rows_unit_norm(set);
  return set;
}

bool rows_unit_norm(const EmbeddingSet& set) {
  for (std::size_t r = 0; r < set.rows; ++r) {
    double sq = 0.0;
    for (float v : set.row(r)) sq += static_cast<double>(v) * v;
    if (std::abs(std::sqrt(sq) - 1.0) > kUnitNormTolerance) return false;
  }
  return true;
}

std::vector<std::uint8_t> encode_embeddings(const EmbeddingSet& set) {
  if (set.data.size() != set.rows * set.dim) {
    fail(ErrorCode::Data, "shape_mismatch", "embedding data length does not equal rows*dim");
  }
  binary::Writer w;
  w.magic("CLEB");
  w.u32(kEmbeddingVersion);
  w.u32(static_cast<std::uint32_t>(set.rows));
  w.u32(static_cast<std::uint32_t>(set.dim));
  for (float v : set.data) w.f32(v);
  return w.bytes();
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  binary::write_file(path, encode_embeddings(set));
}

EmbeddingSet decode_embeddings(std::vector<std::uint8_t> bytes) {
  binary::Reader r(std::move(bytes));
  std::string magic;
  if (!r.magic(magic)) fail(ErrorCode::Data, "truncated", "CLEB header truncated");
  if (magic != "CLEB") fail(ErrorCode::Data, "bad_magic", "not a CLEB file (magic '" + magic + "')");
  std::uint32_t version = 0, rows = 0, dim = 0;
  if (!r.u32(version)) fail(ErrorCode::Data, "truncated", "CLEB header truncated");
  if (version != kEmbeddingVersion) {
    fail(ErrorCode::Data, "version_mismatch", "unsupported CLEB version " + std::to_string(version));
  }
  if (!r.u32(rows) || !r.u32(dim)) fail(ErrorCode::Data, "truncated", "CLEB header truncated");
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * dim;
  if (r.remaining() < count * 4) {
    fail(ErrorCode::Data, "truncated",
         "CLEB payload truncated: expected " + std::to_string(count * 4) + " bytes, have " +
             std::to_string(r.remaining()));
  }
  EmbeddingSet set;
  set.rows = rows;
  set.dim = dim;
  set.data.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    r.f32(set.data[i]);
    if (!std::isfinite(set.data[i])) {
      fail(ErrorCode::Data, "non_finite",
           "non-finite value at row " + std::to_string(i / dim) + ", column " + std::to_string(i % dim));
    }
  }
  if (r.remaining() != 0) fail(ErrorCode::Data, "trailing_bytes", "CLEB file has trailing bytes");
  set.normalized = rows_unit_norm(set);
  return set;
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(binary::read_file(path));
}

EmbeddingSet normalize_rows(const EmbeddingSet& set) {
  EmbeddingSet out = set;
  for (std::size_t r = 0; r < set.rows; ++r) {
    double sq = 0.0;
    for (float v : set.row(r)) sq += static_cast<double>(v) * v;
    if (sq == 0.0) fail(ErrorCode::Data, "zero_norm", "row " + std::to_string(r) + " has zero norm");
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t c = 0; c < set.dim; ++c) {
      out.data[r * set.dim + c] = static_cast<float>(static_cast<double>(set.data[r * set.dim + c]) * inv);
    }
  }
  out.normalized = true;
  return out;
}

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::vector<std::size_t> DatasetManifest::split_indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (items[i].split == s) out.push_back(i);
  return out;
}

std::vector<std::size_t> DatasetManifest::labels() const {
  std::vector<std::size_t> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.label);
  return out;
}

std::vector<std::size_t> DatasetManifest::descriptors_for_class(std::size_t c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    for (std::size_t owner : descriptors[i].classes) {
      if (owner == c) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

std::optional<std::size_t> DatasetManifest::find_item(const std::string& id) const {
  for (std::size_t i = 0; i < items.size(); ++i)
    if (items[i].id == id) return i;
  return std::nullopt;
}

std::string normalize_whitespace(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

namespace {

[[noreturn]] void schema_error(const std::string& what) { fail(ErrorCode::Data, "schema", "manifest: " + what); }

std::size_t class_index(const json& v, std::size_t n_classes, const std::string& where) {
  if (!v.is_number_integer()) schema_error(where + " must be an integer class index");
  const auto idx = v.get<std::int64_t>();
  if (idx < 0 || static_cast<std::size_t>(idx) >= n_classes) {
    fail(ErrorCode::Data, "dangling_index",
         "manifest: " + where + " = " + std::to_string(idx) + " but only " + std::to_string(n_classes) +
             " classes");
  }
  return static_cast<std::size_t>(idx);
}

Split parse_split(const json& v) {
  if (!v.is_string()) schema_error("item split must be a string");
  const auto s = v.get<std::string>();
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  schema_error("unknown split '" + s + "'");
}

}  // namespace

DatasetManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    schema_error(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) schema_error("top level must be an object");
  for (const char* key : {"classes", "items", "descriptors"}) {
    if (!doc.contains(key) || !doc[key].is_array()) schema_error(std::string("missing array '") + key + "'");
  }

  DatasetManifest m;
  for (const auto& c : doc["classes"]) {
    if (!c.is_string()) schema_error("class names must be strings");
    m.classes.push_back(c.get<std::string>());
  }

  std::unordered_set<std::string> seen_ids;
  for (const auto& it : doc["items"]) {
    if (!it.is_object() || !it.contains("id") || !it.contains("label") || !it.contains("split")) {
      schema_error("each item needs id, label, split");
    }
    if (!it["id"].is_string()) schema_error("item id must be a string");
    Item item;
    item.id = it["id"].get<std::string>();
    item.label = class_index(it["label"], m.classes.size(), "item '" + item.id + "' label");
    item.split = parse_split(it["split"]);
    if (!seen_ids.insert(item.id).second) {
      fail(ErrorCode::Data, "duplicate_item", "manifest: item id '" + item.id + "' appears more than once");
    }
    m.items.push_back(std::move(item));
  }

  std::unordered_set<std::string> seen_texts;
  for (const auto& d : doc["descriptors"]) {
    if (!d.is_object() || !d.contains("text") || !d["text"].is_string()) schema_error("each descriptor needs text");
    Descriptor desc;
    desc.text = d["text"].get<std::string>();
    if (d.contains("class")) desc.classes.push_back(class_index(d["class"], m.classes.size(), "descriptor class"));
    if (d.contains("classes")) {
      if (!d["classes"].is_array()) schema_error("descriptor classes must be an array");
      for (const auto& c : d["classes"]) {
        const std::size_t idx = class_index(c, m.classes.size(), "descriptor class");
        if (std::find(desc.classes.begin(), desc.classes.end(), idx) == desc.classes.end()) desc.classes.push_back(idx);
      }
    }
    if (desc.classes.empty()) schema_error("descriptor '" + desc.text + "' has no class");
    if (!seen_texts.insert(normalize_whitespace(desc.text)).second) {
      fail(ErrorCode::Data, "duplicate_descriptor", "manifest: duplicate descriptor text '" + desc.text + "'");
    }
    m.descriptors.push_back(std::move(desc));
  }

  auto path_key = [&](const char* key) -> std::optional<std::filesystem::path> {
    if (!doc.contains(key)) return std::nullopt;
    if (!doc[key].is_string()) schema_error(std::string(key) + " must be a path string");
    std::filesystem::path p = doc[key].get<std::string>();
    return p.is_relative() ? base_dir / p : p;
  };
  m.image_embeddings = path_key("image_embeddings");
  m.descriptor_embeddings = path_key("descriptor_embeddings");
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(binary::read_text(path), path.parent_path());
}

std::string manifest_to_json(const DatasetManifest& m) {
  json doc;
  doc["classes"] = m.classes;
  doc["items"] = json::array();
  for (const auto& it : m.items) {
    doc["items"].push_back({{"id", it.id}, {"label", it.label}, {"split", to_string(it.split)}});
  }
  doc["descriptors"] = json::array();
  for (const auto& d : m.descriptors) {
    json entry{{"text", d.text}, {"class", d.classes.front()}};
    if (d.classes.size() > 1) entry["classes"] = d.classes;
    doc["descriptors"].push_back(std::move(entry));
  }
  if (m.image_embeddings) doc["image_embeddings"] = m.image_embeddings->generic_string();
  if (m.descriptor_embeddings) doc["descriptor_embeddings"] = m.descriptor_embeddings->generic_string();
  return doc.dump(2) + "\n";
}

Corpus load_corpus(const std::filesystem::path& manifest_path, std::optional<std::filesystem::path> images_path,
                   std::optional<std::filesystem::path> descriptors_path) {
  Corpus corpus;
  corpus.manifest = load_manifest(manifest_path);
  const auto img = images_path ? images_path : corpus.manifest.image_embeddings;
  const auto desc = descriptors_path ? descriptors_path : corpus.manifest.descriptor_embeddings;
  if (!img) fail(ErrorCode::Config, "missing_path", "no image embeddings path in config or manifest");
  if (!desc) fail(ErrorCode::Config, "missing_path", "no descriptor embeddings path in config or manifest");
  corpus.images = normalize_rows(read_embeddings(*img));
  corpus.descriptors = normalize_rows(read_embeddings(*desc));
  if (corpus.images.rows != corpus.manifest.items.size()) {
    fail(ErrorCode::Data, "count_mismatch",
         "image embeddings have " + std::to_string(corpus.images.rows) + " rows but manifest lists " +
             std::to_string(corpus.manifest.items.size()) + " items");
  }
  if (corpus.descriptors.rows != corpus.manifest.descriptors.size()) {
    fail(ErrorCode::Data, "count_mismatch",
         "descriptor embeddings have " + std::to_string(corpus.descriptors.rows) + " rows but manifest lists " +
             std::to_string(corpus.manifest.descriptors.size()) + " descriptors");
  }
  if (corpus.images.rows > 0 && corpus.descriptors.rows > 0 && corpus.images.dim != corpus.descriptors.dim) {
    fail(ErrorCode::Data, "dim_mismatch", "image and descriptor embeddings differ in dimension");
  }
  return corpus;
}

}  // namespace clear::io
