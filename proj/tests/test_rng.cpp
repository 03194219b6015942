#include <doctest.h>

#include <cmath>
#include <initializer_list>

#include "nlos/rng.hpp"

using namespace nlos;

TEST_CASE("counter rng is deterministic and uniform in (0,1)") {
    CounterRng a = CounterRng::substream(123, 45, 0);
    CounterRng b = CounterRng::substream(123, 45, 0);
    for (int i = 0; i < 100; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
    CounterRng c = CounterRng::substream(123, 46, 0);
    CHECK(a.uniform() != c.uniform());
}

TEST_CASE("poisson sampler matches mean and variance on both branches") {
    for (double mean : {0.5, 3.0, 25.0, 400.0}) {
        CounterRng rng = CounterRng::substream(7, static_cast<std::uint64_t>(mean * 100), 0);
        const int n = 20000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double k = rng.poisson(mean);
            CHECK(k >= 0.0);
            CHECK(k == std::floor(k));
            sum += k;
            sum2 += k * k;
        }
        const double m = sum / n;
        const double var = sum2 / n - m * m;
        CHECK(m == doctest::Approx(mean).epsilon(0.05));
        CHECK(var == doctest::Approx(mean).epsilon(0.10));
    }
}

TEST_CASE("poisson edge cases") {
    CounterRng rng(1);
    CHECK(rng.poisson(0.0) == 0.0);
    CHECK_THROWS(rng.poisson(-1.0));
}

TEST_CASE("normal draws have the right first two moments") {
    CounterRng rng = CounterRng::substream(99, 0, 0);
    const int n = 50000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.03));
}
