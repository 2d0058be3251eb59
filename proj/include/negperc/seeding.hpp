#pragma once

#include <cstdint>
#include <cstring>
#include <initializer_list>

namespace negperc {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Order-sensitive mix of a base seed with tags; bit-stable across platforms.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = splitmix64(base);
    for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t));
    return h;
}

// Bit pattern of a double, so real-valued grid coordinates can feed derive_seed.
inline std::uint64_t double_bits(double x) {
    if (x == 0.0) x = 0.0;  // fold -0
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof u);
    return u;
}

}  // namespace negperc
