#pragma once

#include "fppi/types.hpp"

#include <cstdint>
#include <vector>

namespace fppi {

// Counter-based random stream keyed by (seed, replication, stream id). The
// i-th draw is a pure function of the key and i, so replications can run in
// any order or on any thread and still see the same numbers.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t replication, std::uint64_t stream);

    std::uint64_t next_u64();
    // Uniform on the open interval (0, 1).
    double uniform();
    // Standard normal by inverse CDF of uniform().
    double normal();
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Fisher-Yates permutation of 0..n-1.
std::vector<Index> random_permutation(Index n, RandomStream& rng);

}  // namespace fppi
