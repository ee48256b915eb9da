#pragma once

#include <cmath>
#include <cstdint>

namespace fpi {

// Single PRNG used everywhere in the project so that every experiment is
// reproducible from one config seed.  SplitMix64 core, 64-bit state.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal, Box-Muller with one cached value
    double gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // avoid log(0)
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // split off an independent stream (for per-worker determinism)
    Rng split() { return Rng(next_u64() ^ 0xD1B54A32D192ED03ULL); }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace fpi
