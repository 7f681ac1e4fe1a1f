#pragma once
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <string>

namespace loads {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a 64-bit over a byte string. Used to fingerprint run configurations
// in report files; the hash covers semantic inputs only (never worker counts
// or output paths), so reports stay byte-identical across parallelism levels.
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t value);

} // namespace loads
