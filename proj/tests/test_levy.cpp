#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "levybsde/errors.hpp"
#include "levybsde/levy.hpp"
#include "support/quad_oracle.hpp"

#include <cmath>
#include <set>

using namespace levybsde;
namespace oracle = levybsde::testing;

namespace {

double one_wedge_sq(std::span<const double> e) {
    double r2 = 0.0;
    for (double x : e) r2 += x * x;
    return std::min(1.0, r2);
}

// chi^2 99% quantile via the Wilson-Hilferty approximation.
double chi2_q99(int dof) {
    double z = 2.3263478740408408;
    double t = 1.0 - 2.0 / (9.0 * dof) + z * std::sqrt(2.0 / (9.0 * dof));
    return dof * t * t * t;
}

} // namespace

TEST_CASE("validate: tempered stable alpha=0.5 integrates (1^|e|^2)") {
    auto m = LevyMeasure::tempered_stable(1.0, 0.5);
    auto rep = validate(m, 4);
    CHECK(rep.pass);
    CHECK(std::isfinite(rep.value));
    double ref = oracle::oracle_levy(m, one_wedge_sq, 2);
    CHECK(rep.value == doctest::Approx(ref).epsilon(1e-6));
    // Frozen oracle value for this measure (adaptive Simpson, tol 1e-12).
    CHECK(ref == doctest::Approx(1.114184806845).epsilon(1e-8));
    CHECK(rep.mass_beyond_support < 1e-20);
}

TEST_CASE("validate: zero measure passes with value 0") {
    auto rep = validate(LevyMeasure::zero(), 3);
    CHECK(rep.pass);
    CHECK(rep.value == 0.0);
}

TEST_CASE("validate: |e|^-3.5 density diverges") {
    // Declared exponent understates the true singularity; refinement exposes it.
    auto bad = LevyMeasure::scalar([](double e) { return std::pow(std::abs(e), -3.5); }, 1.0, 1.9);
    CHECK_THROWS_AS(validate(bad, 5), DivergentIntegral);
}

TEST_CASE("truncate: below the support infimum nothing changes") {
    auto m = LevyMeasure::finite_uniform(2.0, 1.0); // support [1,2]
    for (int k : {1, 2, 5}) {
        auto tm = truncate(m, k);
        CHECK(tm.total_mass() == doctest::Approx(2.0).epsilon(1e-10));
    }
}

TEST_CASE("truncate: tempered stable masses are strictly increasing in k") {
    auto m = LevyMeasure::tempered_stable(1.0, 0.5);
    double prev = -1.0;
    for (int k : {1, 2, 4, 8}) {
        auto tm = truncate(m, k);
        double ref = oracle::oracle_levy_range(m, [](std::span<const double>) { return 1.0; },
                                               1.0 / k);
        CHECK(tm.total_mass() == doctest::Approx(ref).epsilon(1e-8));
        CHECK(tm.total_mass() > prev);
        prev = tm.total_mass();
    }
}

TEST_CASE("truncate: zero measure has zero mass for all k") {
    for (int k : {1, 4, 16}) CHECK(truncate(LevyMeasure::zero(), k).total_mass() == 0.0);
}

TEST_CASE("sample_jumps: zero mass gives no events") {
    auto tm = truncate(LevyMeasure::zero(), 3);
    RngStream rng(7);
    auto jumps = sample_jumps(tm, 0.0, 1.0, rng);
    CHECK(jumps.count() == 0);
}

TEST_CASE("sample_jumps: Poisson count matches the truncated mass") {
    auto m = LevyMeasure::finite_uniform(2.0, 1.0);
    auto tm = truncate(m, 1);
    REQUIRE(tm.total_mass() == doctest::Approx(2.0).epsilon(1e-10));
    const int reps = 100000;
    RngStream root(20240514);
    double sum = 0.0, sumsq = 0.0;
    for (int r = 0; r < reps; ++r) {
        RngStream stream = root.split(static_cast<std::uint64_t>(r));
        auto jumps = sample_jumps(tm, 0.0, 1.0, stream);
        sum += static_cast<double>(jumps.count());
        sumsq += static_cast<double>(jumps.count()) * static_cast<double>(jumps.count());
    }
    double mean = sum / reps;
    double var = sumsq / reps - mean * mean;
    double ci = 3.0 * std::sqrt(2.0 / reps);
    CHECK(std::abs(mean - 2.0) < ci);
    CHECK(var == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("sample_jumps: deterministic given the stream") {
    auto tm = truncate(LevyMeasure::tempered_stable(1.0, 0.5), 8);
    RngStream a(99), b(99);
    auto ja = sample_jumps(tm, 0.25, 1.5, a);
    auto jb = sample_jumps(tm, 0.25, 1.5, b);
    REQUIRE(ja.count() == jb.count());
    for (std::size_t i = 0; i < ja.count(); ++i) {
        CHECK(ja.times[i] == jb.times[i]);
        CHECK(ja.marks[i] == jb.marks[i]);
    }
}

TEST_CASE("sample_jumps: streams are nested across truncation levels") {
    auto m = LevyMeasure::tempered_stable(1.0, 0.5);
    auto coarse = truncate(m, 4);
    auto fine = truncate(m, 16);
    RngStream a(4242), b(4242);
    auto jc = sample_jumps(coarse, 0.0, 1.0, a);
    auto jf = sample_jumps(fine, 0.0, 1.0, b);
    REQUIRE(jf.count() >= jc.count());
    // Every coarse event appears verbatim in the fine list; the fine list only
    // adds marks below the coarse threshold.
    std::multiset<std::pair<double, double>> fine_events;
    for (std::size_t i = 0; i < jf.count(); ++i)
        fine_events.insert({jf.times[i], jf.marks[i]});
    for (std::size_t i = 0; i < jc.count(); ++i) {
        auto it = fine_events.find({jc.times[i], jc.marks[i]});
        REQUIRE(it != fine_events.end());
        fine_events.erase(it);
    }
    for (const auto& [time, mark] : fine_events) {
        (void)time;
        CHECK(std::abs(mark) < 0.25);
        CHECK(std::abs(mark) >= 0.0625);
    }
}

TEST_CASE("integrate: zero integrand") {
    auto m = LevyMeasure::tempered_stable(1.0, 0.5);
    CHECK(integrate(m, [](std::span<const double>) { return 0.0; }, IntegrandDecay::Quadratic) ==
          0.0);
}

TEST_CASE("integrate: (1^|e|^2) agrees with validate") {
    auto m = LevyMeasure::tempered_stable(1.0, 0.5);
    auto rep = validate(m, 4);
    double v = integrate(m, one_wedge_sq, IntegrandDecay::Quadratic);
    CHECK(v == doctest::Approx(rep.value).epsilon(1e-6));
}

TEST_CASE("integrate: constant integrand against infinite activity raises SlowDecay") {
    auto m = LevyMeasure::tempered_stable(1.0, 0.5);
    CHECK_THROWS_AS(integrate(m, [](std::span<const double>) { return 1.0; },
                              IntegrandDecay::Linear),
                    SlowDecay);
}

TEST_CASE("integrate: linear decay against alpha >= 1 singularity is rejected") {
    auto m = LevyMeasure::tempered_stable(1.0, 1.2);
    auto phi = [](std::span<const double> e) { return std::min(1.0, std::abs(e[0])); };
    CHECK_THROWS_AS(integrate(m, phi, IntegrandDecay::Linear), SlowDecay);
    // The same integrand squared is fine.
    auto phi2 = [&](std::span<const double> e) {
        double v = std::min(1.0, std::abs(e[0]));
        return v * v;
    };
    double ref = oracle::oracle_levy(m, phi2, 2);
    CHECK(integrate(m, phi2, IntegrandDecay::Quadratic) == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("truncated integrate of bounded integrands respects the mass bound") {
    auto m = LevyMeasure::tempered_stable(0.7, 0.5);
    auto tm = truncate(m, 8);
    auto phi = [](std::span<const double> e) { return std::cos(3.0 * e[0]); };
    double v = tm.integrate(phi);
    CHECK(std::abs(v) <= tm.total_mass() * (1.0 + 1e-9));
    double ref = oracle::oracle_levy_range(m, phi, 1.0 / 8);
    CHECK(v == doctest::Approx(ref).epsilon(1e-8));
}

TEST_CASE("small-ball mass decreases monotonically to zero in k") {
    auto m = LevyMeasure::tempered_stable(1.0, 0.5);
    double prev = std::numeric_limits<double>::infinity();
    for (int k : {1, 2, 4, 8, 16, 32}) {
        double mass = small_ball_mass(m, 1.0 / k);
        CHECK(mass < prev);
        CHECK(mass > 0.0);
        prev = mass;
    }
    CHECK(prev < small_ball_mass(m, 1.0) * 0.2);
}

TEST_CASE("sampled marks follow lambda_k / Lambda_k (chi-squared)") {
    auto m = LevyMeasure::tempered_stable(1.0, 0.5);
    auto tm = truncate(m, 2);
    const double thr = 0.5, R = m.support_radius();
    const int nbins = 10;
    // Log-spaced radius bins per sign over [thr, 4]; overflow bin above 4.
    std::vector<double> edges;
    for (int i = 0; i <= nbins; ++i)
        edges.push_back(thr * std::pow(4.0 / thr, static_cast<double>(i) / nbins));
    std::vector<double> expected(2 * (nbins + 1), 0.0);
    for (int b = 0; b < 2; ++b) {
        for (int i = 0; i < nbins; ++i) {
            expected[static_cast<std::size_t>(b * (nbins + 1) + i)] = oracle::oracle_radial(
                [&](double r) { return m.branch_density(b, r); }, edges[i], edges[i + 1]);
        }
        expected[static_cast<std::size_t>(b * (nbins + 1) + nbins)] = oracle::oracle_radial(
            [&](double r) { return m.branch_density(b, r); }, 4.0, R);
    }
    double lambda = 0.0;
    for (double e : expected) lambda += e;
    REQUIRE(lambda == doctest::Approx(tm.total_mass()).epsilon(1e-8));

    const int target = 100000;
    std::vector<double> observed(expected.size(), 0.0);
    RngStream root(777);
    int collected = 0;
    for (int rep = 0; collected < target && rep < 100000; ++rep) {
        RngStream stream = root.split(static_cast<std::uint64_t>(rep));
        auto jumps = sample_jumps(tm, 0.0, 40.0, stream);
        for (std::size_t i = 0; i < jumps.count() && collected < target; ++i, ++collected) {
            double mark = jumps.marks[i];
            int b = mark >= 0.0 ? 0 : 1;
            double r = std::abs(mark);
            int bin = nbins;
            if (r < 4.0) {
                bin = static_cast<int>(std::floor(std::log(r / thr) / std::log(4.0 / thr) * nbins));
                bin = std::clamp(bin, 0, nbins - 1);
            }
            observed[static_cast<std::size_t>(b * (nbins + 1) + bin)] += 1.0;
        }
    }
    REQUIRE(collected == target);
    double chi2 = 0.0;
    int dof = -1;
    for (std::size_t c = 0; c < expected.size(); ++c) {
        double e = expected[c] / lambda * target;
        if (e < 5.0) continue; // merge-negligible cells
        chi2 += (observed[c] - e) * (observed[c] - e) / e;
        ++dof;
    }
    REQUIRE(dof > 3);
    CHECK(chi2 < chi2_q99(dof)); // p > 0.01
}
