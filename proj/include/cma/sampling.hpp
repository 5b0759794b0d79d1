#pragma once

// Deterministic quasi-random node/pair sampling.  All "random" pair scans in
// the library draw from a Weyl sequence whose phase is derived from the
// CMA_SEED environment variable (default 0), so identical configurations and
// seeds reproduce identical scans bit-for-bit.

#include <cstdint>
#include <cstdlib>
#include <string>

#include "grid.hpp"

namespace cma {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

inline std::uint64_t global_seed() {
    if (const char* s = std::getenv("CMA_SEED")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(s, &end, 10);
        if (end && *end == '\0') return static_cast<std::uint64_t>(v);
    }
    return 0;
}

// Low-discrepancy stream of index pairs into a list of m items.  Two Weyl
// rotations with irrational increments sqrt(2)-1 and sqrt(3)-1; the seed only
// shifts the starting phases.
class WeylPairSampler {
  public:
    explicit WeylPairSampler(std::size_t m_, std::uint64_t seed = global_seed()) : m(m_) {
        std::uint64_t s1 = detail::splitmix64(seed);
        std::uint64_t s2 = detail::splitmix64(s1);
        a = static_cast<double>(s1 >> 11) * 0x1.0p-53;
        b = static_cast<double>(s2 >> 11) * 0x1.0p-53;
    }

    std::pair<std::size_t, std::size_t> next() {
        a += 0.41421356237309515;  // sqrt(2) - 1
        b += 0.7320508075688772;   // sqrt(3) - 1
        if (a >= 1.0) a -= 1.0;
        if (b >= 1.0) b -= 1.0;
        auto i = static_cast<std::size_t>(a * static_cast<double>(m));
        auto j = static_cast<std::size_t>(b * static_cast<double>(m));
        if (i >= m) i = m - 1;
        if (j >= m) j = m - 1;
        return {i, j};
    }

  private:
    std::size_t m;
    double a = 0, b = 0;
};

// Scalar Weyl stream in [0,1).
class WeylScalar {
  public:
    explicit WeylScalar(std::uint64_t seed = global_seed()) {
        a = static_cast<double>(detail::splitmix64(seed ^ 0x5bf0'3635ULL) >> 11) * 0x1.0p-53;
    }
    double next() {
        a += 0.6180339887498949;  // golden ratio conjugate
        if (a >= 1.0) a -= 1.0;
        return a;
    }

  private:
    double a = 0;
};

}  // namespace cma
