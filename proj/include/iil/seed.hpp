#pragma once

#include <cstdint>
#include <initializer_list>

namespace iil {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Child seed for a path below `root`; every stochastic stage draws its own
// stream so that changing one stage never perturbs another.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix64(root);
    for (auto p : path) s = mix64(s ^ mix64(p + 0x51ed270b27a1f3c5ULL));
    return s;
}

// Stream tags.
namespace stream {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t shuffle = 2;
inline constexpr std::uint64_t noise = 3;
inline constexpr std::uint64_t split = 4;
inline constexpr std::uint64_t data = 5;
inline constexpr std::uint64_t exemplar = 6;
}  // namespace stream

}  // namespace iil
