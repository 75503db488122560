#include "ssrlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace ssrlab {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t grid_index, std::uint64_t trial_index) {
    std::uint64_t h = mix64(master);
    h = mix64(h ^ (grid_index * 0xD1B54A32D192ED03ULL));
    h = mix64(h ^ (trial_index * 0xABC98388FB8FAC03ULL));
    return h;
}

CounterStream::CounterStream(std::uint64_t key) : key_(mix64(key ^ 0x5851F42D4C957F2DULL)) {}

std::uint64_t CounterStream::bits(std::uint64_t counter) const {
    return mix64(mix64(counter * kGolden + key_) ^ key_);
}

double CounterStream::uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterStream::normal(std::uint64_t index) const {
    const std::uint64_t pair = index >> 1;
    const double u1 = uniform(2 * pair);
    const double u2 = uniform(2 * pair + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (index & 1ULL) ? r * std::sin(angle) : r * std::cos(angle);
}

double CounterStream::rademacher(std::uint64_t index) const {
    return (bits(index) >> 63) ? 1.0 : -1.0;
}

}  // namespace ssrlab
