// Copyright 2026 The clear Authors.
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0).

#include "clear/hash.hpp"

#include <openssl/evp.h>

#include <array>

#include "clear/binary.hpp"
#include "clear/error.hpp"

namespace clear {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::Data, "hash_error", "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(std::span<const double> values) {
  binary::Writer w;
  for (double v : values) w.f64(v);
  return sha256_hex(w.bytes());
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(binary::read_file(path)); }

}  // namespace clear
