#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pumpwatch {

// FNV-1a 64-bit. Used for input-file digests in run manifests; not crypto.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t digest_file(const std::string& path);

std::string hex64(std::uint64_t v);

}  // namespace pumpwatch
