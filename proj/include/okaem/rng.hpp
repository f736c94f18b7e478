#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace okaem {

// SplitMix64 step; also used as a finalizer to combine key material.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Folds a list of keys into one 64-bit stream seed. Used to derive
// independent sub-streams (per run, per generation, per row, ...).
inline std::uint64_t mix_keys(std::initializer_list<std::uint64_t> keys) {
    std::uint64_t s = 0x8fb3a1d94c5e7b21ULL;
    for (std::uint64_t k : keys) {
        s ^= k + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
        splitmix64(s);
    }
    return splitmix64(s);
}

// Counter-based stream: cheap to construct, deterministic from its key.
class KeyedStream {
public:
    explicit KeyedStream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1) with 53 random bits; identical on every platform.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

// General-purpose generator for the evolutionary loops. Wraps mt19937_64 but
// produces doubles from raw bits so sequences do not depend on the standard
// library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n must be positive.
    std::size_t uniform_index(std::size_t n) {
        // Rejection-free modulo is fine here: n is tiny relative to 2^64.
        return static_cast<std::size_t>(next_u64() % n);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

} // namespace okaem
