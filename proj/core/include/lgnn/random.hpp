#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lgnn {

using Rng = std::mt19937_64;

/// Deterministic sub-stream seed: mixes a base seed with a stream name
/// ("data", "init", "dropout", "folds", ...) through splitmix64.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

inline Rng make_rng(std::uint64_t seed, std::string_view stream) {
    return Rng{derive_seed(seed, stream)};
}

}  // namespace lgnn
