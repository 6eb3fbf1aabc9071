#pragma once

#include <cstdint>
#include <vector>

namespace aao {

// xoshiro256** seeded through splitmix64; normals by Box-Muller.
// Output is bit-identical on every platform for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);
    double normal();
    std::vector<double> normals(std::size_t n);

private:
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace aao
