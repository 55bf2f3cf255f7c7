#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace gfts {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is an
/// independent task writing to its own output slot, so results never depend
/// on the worker count. The first exception thrown (lowest index) is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

/// splitmix64 finalizer.
[[nodiscard]] std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-based seed expansion: one user seed, a stream tag and an index give
/// an independent 64-bit task seed.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                        std::uint64_t index) noexcept;

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit word.
[[nodiscard]] inline double unit_interval(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace gfts
