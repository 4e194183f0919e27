#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "levybsde/errors.hpp"
#include "levybsde/sde.hpp"
#include "support/quad_oracle.hpp"

#include <cmath>
#include <cstring>
#include <random>

using namespace levybsde;
namespace oracle = levybsde::testing;

namespace {

ModelSpec constant_coeff_model(double b, double sigma, double beta_coef,
                               std::shared_ptr<const LevyMeasure> measure) {
    ModelSpec spec;
    spec.dims = {1, 1, 1, 1};
    spec.horizon = 1.0;
    spec.drift = [b](double, std::span<const double>, std::span<double> o) { o[0] = b; };
    spec.diffusion = [sigma](double, std::span<const double>, std::span<double> o) { o[0] = sigma; };
    spec.jump_coef = [beta_coef](double, std::span<const double>, std::span<const double> e,
                                 std::span<double> o) {
        o[0] = beta_coef * std::min(1.0, std::abs(e[0]));
    };
    spec.beta_state_independent = true;
    spec.terminal = {[](std::span<const double> x) { return x[0]; }};
    spec.driver = {[](double, std::span<const double>, std::span<const double>,
                      std::span<const double>, double) { return 0.0; }};
    spec.driver_uses_q = {0};
    spec.jump_weight = {[](double, std::span<const double>, std::span<const double> e) {
        return std::min(1.0, std::abs(e[0]));
    }};
    spec.measure = std::move(measure);
    return spec;
}

std::shared_ptr<const LevyMeasure> zero_measure() {
    return std::make_shared<const LevyMeasure>(LevyMeasure::zero());
}

std::shared_ptr<const LevyMeasure> tempered_measure() {
    return std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
}

} // namespace

TEST_CASE("simulate: all-zero coefficients keep the state constant") {
    auto spec = constant_coeff_model(0.0, 0.0, 0.0, zero_measure());
    auto tm = truncate(*spec.measure, 1);
    auto grid = TimeGrid::uniform(0.0, 1.0, 20);
    double x0[1] = {1.7};
    auto bundle = simulate(spec, tm, 0.0, x0, grid, 64, 5);
    for (int p = 0; p < bundle.n_paths; ++p)
        for (int j = 0; j <= grid.n_steps; ++j) CHECK(bundle.state(p, j)[0] == 1.7);
}

TEST_CASE("simulate: pure drift integrates exactly") {
    auto spec = constant_coeff_model(1.0, 0.0, 0.0, zero_measure());
    auto tm = truncate(*spec.measure, 1);
    auto grid = TimeGrid::uniform(0.0, 1.0, 50);
    double x0[1] = {-0.5};
    auto bundle = simulate(spec, tm, 0.0, x0, grid, 4, 9);
    for (int p = 0; p < bundle.n_paths; ++p)
        CHECK(bundle.state(p, grid.n_steps)[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("simulate: Brownian mean and variance at the horizon") {
    auto spec = constant_coeff_model(0.0, 1.0, 0.0, zero_measure());
    auto tm = truncate(*spec.measure, 1);
    auto grid = TimeGrid::uniform(0.0, 1.0, 50);
    const int n = 100000;
    double x0[1] = {0.25};
    auto bundle = simulate(spec, tm, 0.0, x0, grid, n, 20240101);
    double s = 0.0, s2 = 0.0;
    for (int p = 0; p < n; ++p) {
        double v = bundle.state(p, grid.n_steps)[0] - 0.25;
        s += v;
        s2 += v * v;
    }
    double mean = s / n, var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("simulate: deterministic across runs with one seed") {
    auto spec = constant_coeff_model(0.05, 0.3, 0.2, tempered_measure());
    auto tm = truncate(*spec.measure, 8);
    auto grid = TimeGrid::uniform(0.0, 1.0, 25);
    double x0[1] = {0.0};
    auto a = simulate(spec, tm, 0.0, x0, grid, 500, 77);
    auto b = simulate(spec, tm, 0.0, x0, grid, 500, 77);
    REQUIRE(a.states.size() == b.states.size());
    CHECK(std::memcmp(a.states.data(), b.states.data(), a.states.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(a.brownian.data(), b.brownian.data(), a.brownian.size() * sizeof(double)) ==
          0);
    REQUIRE(a.jump_times.size() == b.jump_times.size());
    CHECK(std::memcmp(a.jump_times.data(), b.jump_times.data(),
                      a.jump_times.size() * sizeof(double)) == 0);
}

TEST_CASE("simulate: stored jump events satisfy the jump consistency invariant") {
    auto spec = constant_coeff_model(0.0, 0.2, 0.4, tempered_measure());
    auto tm = truncate(*spec.measure, 4);
    auto grid = TimeGrid::uniform(0.0, 1.0, 10);
    double x0[1] = {0.3};
    auto bundle = simulate(spec, tm, 0.0, x0, grid, 200, 11);
    std::size_t checked = 0;
    std::vector<double> beta(1);
    for (std::size_t ev = 0; ev < bundle.jump_times.size(); ++ev) {
        spec.jump_coef(bundle.jump_times[ev], bundle.jump_pre_state(ev), bundle.jump_mark(ev),
                       beta);
        CHECK(bundle.jump_post_state(ev)[0] ==
              doctest::Approx(bundle.jump_pre_state(ev)[0] + beta[0]).epsilon(1e-14));
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("simulate: truncation coupling shrinks with the small-jump mass") {
    auto measure = tempered_measure();
    auto spec = constant_coeff_model(0.0, 0.2, 0.3, measure);
    auto grid = TimeGrid::uniform(0.0, 1.0, 25);
    const int n = 4000;
    double x0[1] = {0.0};
    auto reference = simulate(spec, truncate(*measure, 32), 0.0, x0, grid, n, 314);
    double prev = std::numeric_limits<double>::infinity();
    for (int k : {4, 8, 16}) {
        auto bundle = simulate(spec, truncate(*measure, k), 0.0, x0, grid, n, 314);
        double err = 0.0;
        for (int p = 0; p < n; ++p) {
            double sup = 0.0;
            for (int j = 0; j <= grid.n_steps; ++j) {
                double dv = bundle.state(p, j)[0] - reference.state(p, j)[0];
                sup = std::max(sup, dv * dv);
            }
            err += sup;
        }
        err /= n;
        CHECK(err < prev);
        CHECK(err > 0.0);
        prev = err;
    }
}

TEST_CASE("moment_check: degenerate inputs") {
    auto spec = constant_coeff_model(0.0, 0.0, 0.0, zero_measure());
    auto tm = truncate(*spec.measure, 1);
    auto grid = TimeGrid::uniform(0.0, 1.0, 10);
    double x0[1] = {2.0};
    auto bundle = simulate(spec, tm, 0.0, x0, grid, 32, 3);
    auto rep = moment_check(bundle, nullptr, 2);
    for (double v : rep.statistic) CHECK(v == 0.0);
    CHECK(rep.fitted_constant == 0.0);
    CHECK(rep.monotone);

    // Same seeds and coefficients, identical start: difference is exactly 0.
    auto bundle2 = simulate(spec, tm, 0.0, x0, grid, 32, 3);
    auto rep2 = moment_check(bundle, &bundle2, 2);
    for (double v : rep2.statistic) CHECK(v == 0.0);
}

TEST_CASE("moment_check: Brownian running max matches an independent oracle") {
    auto spec = constant_coeff_model(0.0, 1.0, 0.0, zero_measure());
    auto tm = truncate(*spec.measure, 1);
    const int n_steps = 50;
    auto grid = TimeGrid::uniform(0.0, 1.0, n_steps);
    const int n = 100000;
    double x0[1] = {0.0};
    auto bundle = simulate(spec, tm, 0.0, x0, grid, n, 555);
    auto rep = moment_check(bundle, nullptr, 2);
    double stat_T = rep.statistic.back();

    // Independent implementation: plain std::mt19937_64 random walk on the
    // same node count.
    std::mt19937_64 gen(987654321);
    std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / n_steps));
    const int m = 200000;
    double acc = 0.0, acc2 = 0.0;
    for (int p = 0; p < m; ++p) {
        double w = 0.0, sup = 0.0;
        for (int j = 0; j < n_steps; ++j) {
            w += normal(gen);
            sup = std::max(sup, w * w);
        }
        acc += sup;
        acc2 += sup * sup;
    }
    double oracle_mean = acc / m;
    double oracle_se = std::sqrt((acc2 / m - oracle_mean * oracle_mean) / m);
    // Frozen from a 10^7-path run of the oracle at these settings.
    CHECK(oracle_mean == doctest::Approx(1.6431).epsilon(0.02));
    CHECK(std::abs(stat_T - oracle_mean) < 5.0 * (oracle_se + 0.006));
    // Doob's L2 inequality is an envelope, not an identity.
    CHECK(stat_T < 4.0 * 1.05);
    CHECK(rep.max_rel_residual < 0.15);
    CHECK(rep.monotone);
}

TEST_CASE("moment_check: estimate envelope on the closed-form anchor model") {
    auto measure = tempered_measure();
    auto spec = make_model("linear_additive", {}, measure);
    auto tm = truncate(*measure, 8);
    auto grid = TimeGrid::uniform(0.0, 1.0, 25);
    double x0[1] = {1.0};
    auto bundle = simulate(spec, tm, 0.0, x0, grid, 20000, 2024);
    auto rep = moment_check(bundle, nullptr, 2);
    CHECK(rep.fitted_constant > 0.0);
    CHECK(rep.max_rel_residual < 0.15);
    CHECK(rep.monotone);

    // Coupled difference with state-independent coefficients is the initial
    // offset up to floating-point associativity noise.
    double x1[1] = {2.5};
    auto bundle2 = simulate(spec, tm, 0.0, x1, grid, 20000, 2024);
    auto diff = moment_check(bundle, &bundle2, 2);
    for (double v : diff.statistic) CHECK(v <= 1e-25);

    // A state-dependent diffusion makes the coupled difference genuinely
    // random; the statistic stays within a bounded distortion of the
    // (s-t)|x-x'|^2 envelope.
    auto spec_sd = spec;
    spec_sd.diffusion = [](double, std::span<const double> x, std::span<double> o) {
        o[0] = 0.2 * (1.0 + 0.3 * std::sin(x[0]));
    };
    auto b1 = simulate(spec_sd, tm, 0.0, x0, grid, 20000, 2024);
    auto b2 = simulate(spec_sd, tm, 0.0, x1, grid, 20000, 2024);
    auto diff_sd = moment_check(b1, &b2, 2);
    CHECK(diff_sd.statistic.back() > 0.0);
    CHECK(diff_sd.fitted_constant > 0.0);
    // The envelope is one-sided: the per-node ratio must stay bounded (its
    // max is the empirical M_2), not constant.
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    for (std::size_t i = 0; i < diff_sd.statistic.size(); ++i) {
        double ratio = diff_sd.statistic[i] / (diff_sd.s_nodes[i] * 1.5 * 1.5);
        rmin = std::min(rmin, ratio);
        rmax = std::max(rmax, ratio);
    }
    CHECK(rmax < 1.0);          // far below a unit envelope constant
    CHECK(rmax / rmin < 10.0);  // shape sanity
    CHECK(diff_sd.monotone);
}

TEST_CASE("moment_check: grid mismatch is rejected") {
    auto spec = constant_coeff_model(0.0, 1.0, 0.0, zero_measure());
    auto tm = truncate(*spec.measure, 1);
    auto g1 = TimeGrid::uniform(0.0, 1.0, 10);
    auto g2 = TimeGrid::uniform(0.0, 1.0, 20);
    double x0[1] = {0.0};
    auto b1 = simulate(spec, tm, 0.0, x0, g1, 16, 1);
    auto b2 = simulate(spec, tm, 0.0, x0, g2, 16, 1);
    CHECK_THROWS_AS(moment_check(b1, &b2, 2), GridMismatch);
}

TEST_CASE("truncation coupling identity for state-independent coefficients") {
    // With constant sigma and state-independent beta, paths at two truncation
    // levels differ exactly by the extra small jumps minus the compensator
    // difference.
    auto measure = tempered_measure();
    auto spec = constant_coeff_model(0.05, 0.2, 0.3, measure);
    auto grid = TimeGrid::uniform(0.0, 1.0, 20);
    double x0[1] = {0.0};
    auto tm_coarse = truncate(*measure, 4);
    auto tm_fine = truncate(*measure, 16);
    auto coarse = simulate(spec, tm_coarse, 0.0, x0, grid, 200, 808);
    auto fine = simulate(spec, tm_fine, 0.0, x0, grid, 200, 808);
    double comp_diff = tm_fine.integrate([](std::span<const double> e) {
                           return 0.3 * std::min(1.0, std::abs(e[0]));
                       }) -
                       tm_coarse.integrate([](std::span<const double> e) {
                           return 0.3 * std::min(1.0, std::abs(e[0]));
                       });
    for (int p = 0; p < 200; ++p) {
        double small_jumps = 0.0;
        for (std::size_t ev = fine.jump_begin(p); ev < fine.jump_end(p); ++ev) {
            double mark = fine.jump_mark(ev)[0];
            if (std::abs(mark) < 0.25) small_jumps += 0.3 * std::min(1.0, std::abs(mark));
        }
        double lhs = fine.state(p, grid.n_steps)[0] - coarse.state(p, grid.n_steps)[0];
        double rhs = small_jumps - 1.0 * comp_diff;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10).scale(1.0));
    }
}
