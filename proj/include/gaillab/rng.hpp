#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace gaillab {

/// Deterministic random stream. Wraps mt19937_64 with hand-rolled draws so
/// sequences do not depend on the standard library's distribution
/// implementations (libstdc++ and libc++ disagree on those).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (polar-free variant, two uniforms per call).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Index draw from unnormalized nonnegative weights.
    /// Falls back to the last positive-weight index on accumulated roundoff.
    int categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        int last_positive = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] > 0.0) last_positive = static_cast<int>(i);
            u -= weights[i];
            if (u < 0.0 && weights[i] > 0.0) return static_cast<int>(i);
        }
        return last_positive;
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace gaillab
