#pragma once

// Counter-based randomness: every draw is a pure hash of
// (seed, checker id, sample index, slot), so results are identical under
// any parallel schedule or retry pattern.

#include <cstdint>
#include <cmath>
#include <string_view>

#include "meanscope/common.hpp"

namespace meanscope {

inline uint64_t splitmix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= uint64_t(uint8_t(c));
        h *= 0x100000001b3ULL;
    }
    return h;
}

class CounterRng {
  public:
    CounterRng(uint64_t seed, std::string_view stream) : key_(splitmix64(seed ^ fnv1a(stream))) {}

    double uniform01(uint64_t sample, uint32_t slot) const {
        uint64_t h = splitmix64(key_ ^ splitmix64(sample * 0x9e3779b97f4a7c15ULL));
        h = splitmix64(h ^ (uint64_t(slot) * 0xd1342543de82ef95ULL));
        return double(h >> 11) * 0x1.0p-53;
    }

    double uniform(uint64_t sample, uint32_t slot, double a, double b) const {
        return a + (b - a) * uniform01(sample, slot);
    }

    // log-uniform on [lo, hi]: structure can sit at any scale in the window
    double log_uniform(uint64_t sample, uint32_t slot, double lo, double hi) const {
        return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * uniform01(sample, slot));
    }

    double log_uniform(uint64_t sample, uint32_t slot, const Interval& w) const {
        return log_uniform(sample, slot, w.lo, w.hi);
    }

  private:
    uint64_t key_;
};

}  // namespace meanscope
