#pragma once

#include <cstdint>
#include <vector>

namespace esg {

// Counter-based deterministic PRNG built on the splitmix64 finalizer.
// Every draw is a pure function of (seed, stream, counter), so generated
// datasets are byte-identical across platforms: only fixed-width integer
// arithmetic and IEEE-754 multiplies are involved.
struct counter_rng {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t counter = 0;

    counter_rng() = default;
    counter_rng(std::uint64_t seed, std::uint64_t stream)
        : seed(seed), stream(stream) {}

    static std::uint64_t mix(std::uint64_t z);

    std::uint64_t next_u64();

    // uniform in [0, 1)
    double next_unit();

    // uniform integer in [lo, hi] inclusive
    std::int64_t next_int(std::int64_t lo, std::int64_t hi);

    // uniform real in [lo, hi)
    double next_real(double lo, double hi);

    // approximate N(0, sigma^2) as sum of 12 uniforms minus 6; uses only
    // fixed-width arithmetic so streams reproduce bit-exactly everywhere
    double next_normal(double sigma = 1.0);

    // in-place Fisher-Yates
    void shuffle(std::vector<int>& v);
};

// derives a child stream id, e.g. per-video or per-purpose substreams
std::uint64_t derive_stream(std::uint64_t parent, std::uint64_t salt);

}  // namespace esg
