#include "ssrlab/parallel.hpp"
#include "ssrlab/rng.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

using namespace ssrlab;

TEST_CASE("counter stream is a pure function of key and counter") {
    const CounterStream a(42), b(42), c(43);
    for (std::uint64_t i = 0; i < 100; ++i) {
        CHECK(a.bits(i) == b.bits(i));
        CHECK(a.normal(i) == b.normal(i));
    }
    int same = 0;
    for (std::uint64_t i = 0; i < 100; ++i) same += a.bits(i) == c.bits(i);
    CHECK(same == 0);
    // Reverse order gives the same draws.
    std::vector<double> forward, backward(50);
    for (std::uint64_t i = 0; i < 50; ++i) forward.push_back(a.normal(i));
    for (std::uint64_t i = 50; i-- > 0;) backward[i] = a.normal(i);
    CHECK(forward == backward);
}

TEST_CASE("uniform draws lie strictly inside (0, 1)") {
    const CounterStream s(7);
    double lo = 1.0, hi = 0.0;
    for (std::uint64_t i = 0; i < 100000; ++i) {
        const double u = s.uniform(i);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
}

TEST_CASE("normal and rademacher moments") {
    const CounterStream s(2024);
    const int N = 200000;
    double m1 = 0, m2 = 0, m4 = 0, r1 = 0, r2 = 0;
    for (int i = 0; i < N; ++i) {
        const double x = s.normal(static_cast<std::uint64_t>(i));
        m1 += x;
        m2 += x * x;
        m4 += x * x * x * x;
        const double r = s.rademacher(static_cast<std::uint64_t>(i));
        CHECK((r == 1.0 || r == -1.0));
        r1 += r;
        r2 += r * r;
    }
    CHECK(std::abs(m1 / N) < 0.01);
    CHECK(std::abs(m2 / N - 1.0) < 0.015);
    CHECK(std::abs(m4 / N - 3.0) < 0.06);
    CHECK(std::abs(r1 / N) < 0.01);
    CHECK(r2 / N == doctest::Approx(1.0));
}

TEST_CASE("derived seeds are distinct across grid and trial indices") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t g = 0; g < 30; ++g)
        for (std::uint64_t t = 0; t < 30; ++t) seen.insert(derive_seed(5, g, t));
    CHECK(seen.size() == 900);
    CHECK(derive_seed(5, 1, 2) != derive_seed(5, 2, 1));
    CHECK(derive_seed(5, 1, 2) != derive_seed(6, 1, 2));
}

TEST_CASE("parallel_for visits every index once and rethrows the lowest failure") {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);

    try {
        parallel_for(100, 4, [](std::size_t i) {
            if (i == 17 || i == 60) throw std::runtime_error(std::to_string(i));
        });
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "17");
    }
    CHECK(resolve_threads(3) == 3);
    CHECK(resolve_threads(0) >= 1);
}
