// Copyright (C) 2026 FreqKV Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

namespace freqkv {

// Software version stamped into run metadata and file headers.
inline constexpr std::string_view kVersion = "0.1.0";

// Names the exact weight-initialization pipeline (generator + transform) so a
// metadata record pins runs bit-for-bit; bump when the draw order changes.
inline constexpr std::string_view kPrngName = "mt19937_64-boxmuller-v1";

// FNV-1a, the 64-bit variant: small, dependency-free, and stable across
// platforms.  Used to fingerprint configurations, not for security.
constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ull;
  }
  return hash;
}

}  // namespace freqkv
