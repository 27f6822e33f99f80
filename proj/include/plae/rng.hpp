#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace plae {

// Deterministic random source. Every stochastic choice in the project flows
// through this class so that the (init, shuffle, augment) seed triple fully
// determines a run. Raw words come from std::mt19937, whose output sequence
// is fixed by the standard; the distribution mappings are hand-rolled because
// the standard library distribution objects are not bit-portable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(mix_to_u32(seed)) {}

    // Independent stream derived from a seed and a stream id tuple,
    // e.g. (epoch, image index). Streams with distinct ids do not interact.
    static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
        std::uint64_t h = splitmix(seed ^ 0x5851f42d4c957f2dULL);
        for (std::uint64_t s : stream) h = splitmix(h ^ s);
        return Rng(h);
    }

    std::uint32_t next_u32() { return eng_(); }

    // Uniform in [0, 1) with 24 bits of precision. One raw draw.
    float uniform() { return float(next_u32() >> 8) * 0x1p-24f; }

    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n >= 1. One raw draw (multiply-shift;
    // bias is below n / 2^32).
    int uniform_int(int n) {
        return int((std::uint64_t(next_u32()) * std::uint64_t(n)) >> 32);
    }

    // Gaussian via Box-Muller. Exactly two raw draws per call.
    float normal(float mean, float sigma) {
        double u1 = (double(next_u32()) + 1.0) * 0x1p-32; // (0, 1]
        double u2 = double(next_u32()) * 0x1p-32;         // [0, 1)
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * float(r * std::cos(6.283185307179586 * u2));
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }
    static std::uint32_t mix_to_u32(std::uint64_t seed) {
        std::uint64_t h = splitmix(seed);
        return std::uint32_t(h ^ (h >> 32));
    }

    std::mt19937 eng_;
};

} // namespace plae
