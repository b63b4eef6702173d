#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace genemut {

// Deterministic RNG. Wraps mt19937_64 but maps bits to doubles directly so
// streams do not depend on the standard library's distribution
// implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal, Box-Muller with cached spare.
    double gauss();

    // [0, n)
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Mixes a base seed with a stream label so substreams (per slide, per
    // parameter) are independent yet reproducible.
    static std::uint64_t substream(std::uint64_t seed, std::string_view label);

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace genemut
