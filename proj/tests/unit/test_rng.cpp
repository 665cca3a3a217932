#include <doctest.h>

#include "promptqd/rng.hpp"

#include <cmath>

using namespace promptqd;

TEST_SUITE("rng") {

TEST_CASE("serialize and restore resume the stream exactly") {
    Rng a(42);
    for (int i = 0; i < 17; ++i) a.normal();
    const std::string state = a.serialize();
    Rng b;
    b.restore(state);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("named substreams are distinct and reproducible") {
    Rng a = Rng::substream(7, "init");
    Rng b = Rng::substream(7, "init");
    Rng c = Rng::substream(7, "noise");
    CHECK(a == b);
    CHECK_FALSE(a == c);
}

TEST_CASE("uniform and normal moments") {
    Rng r(3);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        su += u;
        const double z = r.normal();
        sn += z;
        sn2 += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("below stays in range") {
    Rng r(11);
    std::size_t counts[5] = {};
    for (int i = 0; i < 50000; ++i) ++counts[r.below(5)];
    for (auto c : counts) CHECK(std::abs(static_cast<double>(c) - 10000.0) < 400.0);
}

}
