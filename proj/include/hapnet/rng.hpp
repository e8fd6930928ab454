#pragma once

#include <cmath>
#include <cstdint>

namespace hapnet {

namespace detail {
inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}
} // namespace detail

// Deterministic splittable generator (splitmix64). Substreams are derived
// from the stream id, not from the current position, so derivation is
// independent of how much the parent stream has been consumed. All draws
// are reproducible bit-for-bit for a given seed on any thread layout.
class Rng {
public:
    explicit Rng(uint64_t seed) : id_(seed), state_(seed) {}

    uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ull;
        return detail::mix64(state_);
    }

    // substream keyed by up to three integers
    Rng derive(uint64_t a, uint64_t b = 0, uint64_t c = 0) const {
        uint64_t s = id_;
        s = detail::mix64(s ^ (a + 0x9e3779b97f4a7c15ull));
        s = detail::mix64(s ^ (b + 0xd1b54a32d192ed03ull));
        s = detail::mix64(s ^ (c + 0x8cb92ba72f3d8dd7ull));
        return Rng(s);
    }

    // uniform in [0, 1)
    double uniform01() { return double(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; the sine partner is discarded to keep the stream stateless
    double normal(double mu = 0.0, double sigma = 1.0) {
        double u1 = double((next() >> 11) + 1) * 0x1.0p-53; // (0, 1]
        double u2 = uniform01();
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
        return mu + sigma * z;
    }

    // unbiased integer in [0, n), rejection sampled
    uint64_t bounded(uint64_t n) {
        if (n == 0) return 0;
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

private:
    uint64_t id_;
    uint64_t state_;
};

} // namespace hapnet
