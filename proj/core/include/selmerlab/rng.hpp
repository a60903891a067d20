// Counter-based pseudo random bits.
//
// Every draw is a pure function of (seed, counter), so parallel shards that
// partition the counter range reproduce the exact same stream regardless of
// scheduling.  The mixer is SplitMix64 applied to the seed/counter pair,
// which is more than enough for Monte Carlo on F2 matrices.
#pragma once

#include <cstdint>

namespace selmerlab {

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ull))) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    bool next_bit() { return next_u64() >> 63; }

    // Uniform in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection-free is unnecessary here; rejection keeps it exact.
        std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace selmerlab
