#pragma once

#include <cstdint>

namespace rcar {

/// Counter-based 64-bit generator. Output i of stream (seed, id) is
/// mix(key + (i+1) * GAMMA), where mix is the SplitMix64 finalizer
/// (multipliers 0xbf58476d1ce4e5b9, 0x94d049bb133111eb) and
/// GAMMA = 0x9e3779b97f4a7c15 is the 64-bit golden ratio. The key is
/// derived from (seed, stream id) through the same finalizer, so streams
/// with distinct ids are independent substreams of one seed. A stream is
/// a plain value: copies advance independently, there is no global state.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept;

    std::uint64_t next_u64() noexcept;

    /// Uniform on [0,1) with 53 random bits.
    double next_double() noexcept;

    /// Uniform on (0,1]; safe as a log() argument.
    double next_double_pos() noexcept;

    /// Standard normal via Box-Muller. Consumes two uniforms and discards
    /// the paired variate so the draw count per call is fixed.
    double next_normal() noexcept;

private:
    std::uint64_t counter_ = 0;
    std::uint64_t key_ = 0;
};

namespace detail {
/// SplitMix64 finalizer; also usable as a standalone 64-bit hash.
std::uint64_t mix64(std::uint64_t x) noexcept;
}

} // namespace rcar
