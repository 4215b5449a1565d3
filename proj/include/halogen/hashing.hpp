#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace halogen::hashing {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;
// Second basis for the 128-bit digest; any odd constant distinct from the
// standard offset works.
inline constexpr std::uint64_t kAltOffsetBasis = 0x9ae16a3b2f90404full;

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = kFnvOffsetBasis) {
    std::uint64_t h = basis;
    for (unsigned char c : data) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

/// 32-hex-character content digest built from two independent FNV-1a passes.
inline std::string digest128_hex(std::string_view data) {
    return hex64(fnv1a64(data, kFnvOffsetBasis)) + hex64(fnv1a64(data, kAltOffsetBasis));
}

} // namespace halogen::hashing
