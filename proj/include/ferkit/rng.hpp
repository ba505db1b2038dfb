#pragma once

#include <cstdint>
#include <cmath>

namespace ferkit {

// Deterministic xorshift-based generator. All randomness in the toolkit
// flows through this class so that a run is fully reproducible from one
// 64-bit seed. Streams for workers/items are derived with splitmix64
// mixing, never by sharing a generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // splitmix64 warm-up so nearby seeds give unrelated states
        state_ = seed + 0x9E3779B97F4A7C15ull;
        for (int i = 0; i < 4; ++i) (void)next_u64();
    }

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // uniform integer in [0, n); n >= 1
    std::uint64_t uniform_int(std::uint64_t n) {
        return next_u64() % n;
    }

    // standard normal via Box-Muller, spare cached
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Independent stream derived from (seed, stream id).
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        return Rng(seed ^ (0xA0761D6478BD642Full * (stream + 1)));
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace ferkit
