#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

#include "halogen/errors.hpp"
#include "halogen/hashing.hpp"

namespace halogen::rng {

// std::mt19937_64 output is fully specified by the standard, so every draw
// routed through these helpers is reproducible across platforms. The
// distribution adaptors in <random> are not, which is why we roll our own
// bounded draw.
using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) {
    return Engine{seed};
}

/// Derives an independent engine for a named substream of a run seed, so
/// per-record draws do not depend on processing order.
inline Engine make_stream(std::uint64_t seed, std::string_view stream) {
    return Engine{seed ^ hashing::fnv1a64(stream)};
}

/// Uniform draw in [0, bound) via rejection sampling (no modulo bias).
inline std::uint64_t bounded(Engine& eng, std::uint64_t bound) {
    if (bound == 0) throw DomainError("bounded draw requires bound > 0");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % bound;
    std::uint64_t x = eng();
    while (x >= limit) x = eng();
    return x % bound;
}

template <class RandomIt>
void shuffle(RandomIt first, RandomIt last, Engine& eng) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        std::swap(first[i - 1], first[bounded(eng, i)]);
    }
}

template <class T>
void shuffle(std::vector<T>& v, Engine& eng) {
    shuffle(v.begin(), v.end(), eng);
}

/// k distinct indices drawn without replacement from [0, n), in draw order.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Engine& eng) {
    if (k > n) throw DomainError("cannot sample more indices than available");
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(bounded(eng, n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

} // namespace halogen::rng
