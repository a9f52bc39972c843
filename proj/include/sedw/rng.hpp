#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace sedw {

// Seeded generator with hand-rolled distributions so that identical seeds
// give identical streams regardless of the standard library build.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // (0, 1]
    double uniform_pos() { return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal, Box-Muller
    double normal();

    // Gamma(alpha, 1), Marsaglia-Tsang with the alpha<1 boost
    double gamma(double alpha);

    double beta(double a, double b);

    // uniform index in [0, n)
    std::size_t index(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace sedw
