#pragma once

#include <cstdint>
#include <random>

namespace ocrpost {

// Deterministic random source. std::mt19937_64 output is fixed by the
// standard; the derived draws below avoid std::*_distribution, whose
// algorithms are implementation-defined, so streams are reproducible
// across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform in [0, n); n must be > 0.
    size_t uniform_index(size_t n) { return static_cast<size_t>(uniform01() * static_cast<double>(n)) % n; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace ocrpost
