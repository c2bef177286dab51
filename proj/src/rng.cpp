#include "fppi/rng.hpp"

#include "fppi/normal.hpp"

#include <numeric>
#include <stdexcept>

namespace fppi {

namespace {
constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t replication, std::uint64_t stream)
    : key_(splitmix64(splitmix64(splitmix64(seed + golden) + replication * golden) + stream * golden + 1)) {}

std::uint64_t RandomStream::next_u64() {
    ++counter_;
    return splitmix64(key_ + counter_ * golden);
}

double RandomStream::uniform() {
    // 53 random bits, centered in their cell so 0 and 1 never occur.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() { return normal_quantile(uniform()); }

std::uint64_t RandomStream::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RandomStream::below(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
}

std::vector<Index> random_permutation(Index n, RandomStream& rng) {
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

}  // namespace fppi
