#pragma once

#include <cstdint>
#include <random>

namespace nnlab {

std::uint64_t splitmix64(std::uint64_t x);

// Combine seeds/tags into a derived stream seed.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);
std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c);

// mt19937_64 with a fixed uniform/normal mapping, so values do not depend
// on libstdc++ distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller
    double normal();

    // uniform integer in [0, n)
    int below(int n);

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace nnlab
