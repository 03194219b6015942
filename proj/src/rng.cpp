#include "nlos/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace nlos {

namespace {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

CounterRng CounterRng::substream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t lane) {
    std::uint64_t key = splitmix64(seed ^ splitmix64(stream_id ^ splitmix64(lane)));
    return CounterRng(key);
}

std::uint64_t CounterRng::next_u64() { return splitmix64(key_ ^ counter_++ * 0xd1342543de82ef95ull); }

double CounterRng::uniform() {
    // 53 mantissa bits, shifted to the open interval (0, 1).
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

double CounterRng::poisson(double mean) {
    if (mean < 0.0 || !std::isfinite(mean)) throw std::invalid_argument("poisson: mean must be finite and >= 0");
    if (mean == 0.0) return 0.0;
    if (mean < 10.0) {
        // Inversion by sequential search over the CDF.
        const double p0 = std::exp(-mean);
        double p = p0;
        double cdf = p0;
        double k = 0.0;
        const double u = uniform();
        while (u > cdf) {
            k += 1.0;
            p *= mean / k;
            cdf += p;
            if (k > 1100.0) break;  // CDF numerically exhausted
        }
        return k;
    }
    // PTRS transformed rejection (Hormann 1993), valid for mean >= 10.
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
        double u = uniform() - 0.5;
        double v = uniform();
        double us = 0.5 - std::fabs(u);
        double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= v_r) return k;
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * log_mean - mean - std::lgamma(k + 1.0))
            return k;
    }
}

}  // namespace nlos
