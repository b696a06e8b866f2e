#include "rcar/random.hpp"

#include <cmath>

namespace rcar {

namespace detail {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

} // namespace detail

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id) noexcept {
    key_ = detail::mix64(seed + kGolden) ^ detail::mix64(stream_id * kGolden + 0x6a09e667f3bcc909ULL);
    counter_ = 0;
}

std::uint64_t RandomStream::next_u64() noexcept {
    ++counter_;
    return detail::mix64(key_ + counter_ * kGolden);
}

double RandomStream::next_double() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::next_double_pos() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RandomStream::next_normal() noexcept {
    const double u1 = next_double_pos();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

} // namespace rcar
