#pragma once
#include <cstdint>

namespace ssrlab {

// SplitMix64 finalizer; bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

// Seed for one task of a sweep, a pure function of its coordinates.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t grid_index, std::uint64_t trial_index);

// Counter-based stream: draw i is a pure function of (key, i), so any
// subset of draws can be produced in any order with identical results.
class CounterStream {
public:
    explicit CounterStream(std::uint64_t key);

    std::uint64_t bits(std::uint64_t counter) const;
    // Uniform on the open interval (0, 1) with 53 bits of resolution.
    double uniform(std::uint64_t counter) const;
    // Standard normal via Box-Muller; draws 2j and 2j+1 share one uniform pair.
    double normal(std::uint64_t index) const;
    // +1 or -1 with equal probability.
    double rademacher(std::uint64_t index) const;

private:
    std::uint64_t key_;
};

}  // namespace ssrlab
