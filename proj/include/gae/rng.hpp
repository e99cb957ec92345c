#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace gae {

// Deterministic RNG with hand-rolled distributions so that streams are
// reproducible across builds of this project (std::*_distribution output is
// implementation-defined; the mt19937_64 engine itself is not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed != 0 ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1) with 53 bits of entropy.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) via rejection sampling.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) {
            return 0;
        }
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x = next_u64();
        while (x >= limit) {
            x = next_u64();
        }
        return x % n;
    }

    // Box-Muller; one value per call (the pair's second half is discarded to
    // keep the stream position independent of call parity).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Stable stream derivation: hash a parent seed with a tag and indices so that
// every episode / epoch / purpose gets an independent deterministic stream.
inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag) {
    std::uint64_t h = seed ^ 0xcbf29ce484222325ULL;
    for (const char c : tag) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
    }
    Rng mix(h);
    return mix.next_u64();
}

inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t h = derive_seed(seed, tag);
    h ^= 0x9e3779b97f4a7c15ULL + a + (h << 6) + (h >> 2);
    h ^= 0x9e3779b97f4a7c15ULL + b + (h << 6) + (h >> 2);
    Rng mix(h);
    return mix.next_u64();
}

} // namespace gae
