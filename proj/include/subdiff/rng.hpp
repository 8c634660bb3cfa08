#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace subdiff {

// All randomness in the library flows from one master seed through named
// streams, so parallel sweep cells get independent, reproducible generators.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream id = hash of (master seed, purpose string, indices).
inline std::uint64_t stream_seed(std::uint64_t master, std::string_view purpose,
                                 std::initializer_list<std::uint64_t> indices = {}) {
    std::uint64_t h = splitmix64(master);
    for (char c : purpose) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    for (std::uint64_t i : indices) h = splitmix64(h ^ i);
    return h;
}

inline Rng make_rng(std::uint64_t master, std::string_view purpose,
                    std::initializer_list<std::uint64_t> indices = {}) {
    return Rng(stream_seed(master, purpose, indices));
}

}  // namespace subdiff
