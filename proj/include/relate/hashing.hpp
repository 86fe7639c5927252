// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace relate {

using Sha256Digest = std::array<unsigned char, 32>;

Sha256Digest sha256(std::string_view data);
std::string sha256_hex(std::string_view data);

/// First eight digest bytes, big-endian. Stable across platforms and runs.
std::uint64_t stable_hash64(std::string_view data);

/// Seed for a sub-stream identified by `parts`, joined with a separator that
/// cannot occur in decimal numbers or in the ids we use.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::string_view> parts);

}  // namespace relate
