// rng.hpp -- reproducible random substreams and the few samplers the
// simulator needs.
//
// Every work unit draws from its own engine seeded by hashing
// (seed, stream, batch), so results never depend on scheduling. Samplers
// are written out here instead of using <random> distributions, whose
// output is implementation-defined; the engine itself is std::mt19937_64,
// whose sequence the standard fixes.

#pragma once

#include "error.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace sagnac {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t batch) {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ (batch * 0xd1b54a32d192ed03ULL));
}

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
    RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t batch)
        : engine_(substream_seed(seed, stream, batch)) {}

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe to take the logarithm of.
    double uniform_open0() { return 1.0 - uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Number of failures before the first success, success probability p.
    std::uint64_t geometric(double p) {
        if (p >= 1.0) return 0;
        if (!(p > 0.0)) return std::numeric_limits<std::uint64_t>::max();
        const double g = std::floor(std::log(uniform_open0()) / std::log1p(-p));
        if (g >= 1.8e19) return std::numeric_limits<std::uint64_t>::max();
        return static_cast<std::uint64_t>(g);
    }

    double normal() {
        const double u1 = uniform_open0();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    std::mt19937_64 engine_;
};

// Photon-number law of pairs per pulse: Poisson, or the thermal
// (negative binomial) law over `modes` equally weighted modes.
class PairNumberLaw {
public:
    PairNumberLaw(double mean, bool thermal, double modes = 1.0)
        : mean_(mean), thermal_(thermal), modes_(modes) {
        if (!(mean >= 0.0) || !std::isfinite(mean)) throw InvalidArgument("pair mean must be >= 0");
        if (thermal && !(modes >= 1.0)) throw InvalidArgument("thermal mode count must be >= 1");
    }

    double mean() const { return mean_; }
    bool thermal() const { return thermal_; }
    double modes() const { return modes_; }

    // Same family after keeping each pair independently with probability keep.
    PairNumberLaw thinned(double keep) const { return {mean_ * keep, thermal_, modes_}; }

    double p0() const {
        if (!thermal_) return std::exp(-mean_);
        return std::pow(1.0 + mean_ / modes_, -modes_);
    }

    // E[s^N]
    double generating_function(double s) const {
        if (!thermal_) return std::exp(-mean_ * (1.0 - s));
        return std::pow(1.0 + mean_ * (1.0 - s) / modes_, -modes_);
    }

    // Ratio p(n+1)/p(n).
    double step(std::uint64_t n) const {
        if (!thermal_) return mean_ / static_cast<double>(n + 1);
        const double x = mean_ / modes_;
        return (static_cast<double>(n) + modes_) / static_cast<double>(n + 1) * x / (1.0 + x);
    }

    std::uint64_t sample(RandomStream& rng) const { return invert(rng.uniform(), 0); }

    // Draw conditioned on N >= 1.
    std::uint64_t sample_positive(RandomStream& rng) const {
        const double q0 = p0();
        return invert(q0 + rng.uniform() * (1.0 - q0), 0, true);
    }

private:
    std::uint64_t invert(double u, std::uint64_t n, bool positive = false) const {
        double p = p0();
        double cdf = p;
        while (cdf <= u || (positive && n == 0)) {
            p *= step(n);
            ++n;
            cdf += p;
            if (p < 1e-300 && cdf <= u) break;
        }
        return n;
    }

    double mean_;
    bool thermal_;
    double modes_;
};

} // namespace sagnac
