#ifndef AKGNN_RNG_HPP
#define AKGNN_RNG_HPP

#include <cstdint>
#include <random>

namespace akgnn {

/// Named substreams derived from a master seed.
enum class Stream : std::uint64_t {
    FilterInit = 1,
    HeadInit = 2,
    LayerInit = 3,
    Dropout = 4,
    Synthetic = 5,
    Gradcheck = 6,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of substream (stream, index) of `master`. Streams are independent of one
/// another, so e.g. the number of layers never perturbs the filter initialization.
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) noexcept
{
    return splitmix64(splitmix64(splitmix64(master) ^ static_cast<std::uint64_t>(stream)) + index);
}

inline std::mt19937_64 make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0)
{
    return std::mt19937_64(derive_seed(master, stream, index));
}

} // namespace akgnn

#endif // AKGNN_RNG_HPP
