#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace lightloc {

// Deterministic random source. mt19937_64 has a fully specified output
// sequence, and the uniform/normal transforms below are implemented here
// rather than taken from <random> distributions (whose exact sequences are
// implementation-defined), so identical seeds give identical streams on any
// platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n).
    std::size_t index(std::size_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / n * n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    // Standard normal via Box-Muller (no cached spare, to keep the stream
    // position independent of call parity).
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    // First k of a seeded Fisher-Yates pass: k distinct indices from [0, n).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

// splitmix64, used to derive well-separated child seeds from a root seed.
std::uint64_t mix_seed(std::uint64_t x);

// Stable 64-bit FNV-1a hash of a byte string.
std::uint64_t fnv1a64(std::string_view bytes);

// Child seed for a named module/purpose plus an optional stream index.
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose, std::uint64_t stream = 0);

}  // namespace lightloc
