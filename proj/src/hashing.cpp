// SPDX-License-Identifier: Apache-2.0

#include "relate/hashing.hpp"

#include <stdexcept>

#include <openssl/evp.h>

namespace relate {

Sha256Digest sha256(std::string_view data) {
  Sha256Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw std::runtime_error("sha256 failed");
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  static constexpr char kHex[] = "0123456789abcdef";
  const auto digest = sha256(data);
  std::string out;
  out.reserve(digest.size() * 2);
  for (unsigned char b : digest) {
    out += kHex[b >> 4];
    out += kHex[b & 0xF];
  }
  return out;
}

std::uint64_t stable_hash64(std::string_view data) {
  const auto digest = sha256(data);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | digest[i];
  return v;
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> parts) {
  std::string key = std::to_string(base);
  for (auto part : parts) {
    key += '\x1f';
    key += part;
  }
  return stable_hash64(key);
}

}  // namespace relate
