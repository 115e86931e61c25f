#pragma once

// Seeded RNG wrapper. Every stochastic component takes one of these
// explicitly; nothing in the library touches global random state. Derived
// streams (per chain, per stage) come from splitmix64 so that one master
// seed fans out into decorrelated substreams deterministically.

#include <cstdint>
#include <random>

namespace rgml {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(seed) {}

    uint64_t seed() const { return seed_; }

    // Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Uniform index in [0,n). Modulo bias is ~n/2^64, irrelevant here.
    uint64_t index(uint64_t n) { return gen_() % n; }

    bool coin() { return (gen_() & 1ull) != 0; }

    double pm1() { return coin() ? 1.0 : -1.0; }

    // Independent child stream identified by tag.
    Rng derive(uint64_t tag) const {
        uint64_t s = seed_ ^ (0x9e3779b97f4a7c15ull * (tag + 1));
        splitmix64(s);
        return Rng(splitmix64(s));
    }

    std::mt19937_64& raw() { return gen_; }

  private:
    uint64_t seed_;
    std::mt19937_64 gen_;
};

}  // namespace rgml
