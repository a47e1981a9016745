#pragma once

#include <cstdint>
#include <random>

namespace siim {

using Rng = std::mt19937_64;

// Independent sub-streams drawn from one master seed. Values are part of the
// reproducibility contract; do not renumber.
enum class Stream : std::uint64_t {
    topology = 1,
    train_data = 2,
    test_stream = 3,
    eval_set = 4,
    member_init = 5,
    member_shuffle = 6,
    rand_power = 7,
    warm_start_set = 8,
};

/// Mixes (master, stream, index) into a 64-bit seed so that every sample can be
/// generated independently of iteration order or thread count.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0);

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
    return derive_seed(master, static_cast<std::uint64_t>(stream), index);
}

inline Rng make_rng(std::uint64_t seed) {
    return Rng{seed};
}

}  // namespace siim
