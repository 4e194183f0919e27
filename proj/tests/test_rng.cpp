#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "levybsde/rng.hpp"

#include <cmath>
#include <vector>

using namespace levybsde;

TEST_CASE("streams are deterministic and split streams are disjoint") {
    RngStream a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    RngStream parent(5);
    RngStream c1 = parent.split(1), c2 = parent.split(2);
    int equal = 0;
    for (int i = 0; i < 64; ++i)
        if (c1.next_u64() == c2.next_u64()) ++equal;
    CHECK(equal == 0);

    // Splitting does not perturb the parent, and is order independent.
    RngStream p1(9), p2(9);
    (void)p1.split(3);
    CHECK(p1.next_u64() == p2.next_u64());
    CHECK(p1.split(7).next_u64() == p2.split(7).next_u64());
}

TEST_CASE("uniform and normal moments") {
    RngStream rng(2718);
    const int n = 200000;
    double su = 0.0, su2 = 0.0, sn = 0.0, sn2 = 0.0, sn4 = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        su += u;
        su2 += u * u;
        double z = rng.normal();
        sn += z;
        sn2 += z * z;
        sn4 += z * z * z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(su2 / n == doctest::Approx(1.0 / 3).epsilon(0.01));
    CHECK(std::abs(sn / n) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(sn4 / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("normal quantile inverts the normal CDF") {
    for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-9}) {
        double x = RngStream::normal_quantile(p);
        double back = 0.5 * std::erfc(-x / std::sqrt(2.0));
        CHECK(back == doctest::Approx(p).epsilon(1e-10));
    }
    CHECK(RngStream::normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
}

TEST_CASE("poisson sampling matches the law") {
    RngStream rng(31415);
    for (double mean : {0.0, 0.3, 4.5, 900.0}) {
        const int n = mean > 100.0 ? 20000 : 100000;
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            auto k = static_cast<double>(rng.poisson(mean));
            s += k;
            s2 += k * k;
        }
        double mu = s / n, var = s2 / n - mu * mu;
        double se = std::sqrt(std::max(mean, 1e-12) / n);
        CHECK(std::abs(mu - mean) <= 4.0 * se + 1e-12);
        if (mean > 0.0) CHECK(var == doctest::Approx(mean).epsilon(0.08));
    }
}
