#pragma once

#include <cstdint>

namespace aemu {

// SplitMix64 (Steele/Lea/Flood). Counter-based: the state walks a fixed
// gamma and each output is a bijective finalizer of the state, so streams
// keyed by (seed, index) never share draws. This is the single PRNG used
// everywhere; datasets and checkpoints are reproducible across platforms
// because the algorithm is frozen here.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() {
        state_ += kGamma;
        return mix(state_);
    }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Substream keyed on (seed, key): used for per-row dataset streams and
    // per-epoch shuffles so results are independent of evaluation order.
    static SplitMix64 substream(std::uint64_t seed, std::uint64_t key) {
        return SplitMix64(mix(seed) + (key + 1) * kGamma);
    }

  private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
    std::uint64_t state_;
};

} // namespace aemu
