#pragma once

#include <cstdint>
#include <random>

namespace mawii {

// Identifies an independent random stream inside one Monte Carlo replicate.
enum class Stream : std::uint64_t
{
    genotype = 1,
    confounder = 2,
    exposure_noise = 3,
    outcome_noise = 4,
    covariate = 5,
    resample = 6,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed derived from (seed, replicate, stream) so that replicates can be
// generated in any order, on any thread, with identical results.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t rep, Stream stream) noexcept
{
    auto h = splitmix64(seed);
    h = splitmix64(h ^ splitmix64(rep + 0x632be59bd9b4e019ULL));
    h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(stream) * 0x85157af5ULL));
    return h;
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t rep, Stream stream)
{
    return std::mt19937_64{stream_seed(seed, rep, stream)};
}

} // namespace mawii
