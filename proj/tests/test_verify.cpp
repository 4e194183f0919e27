#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "levybsde/errors.hpp"
#include "levybsde/verify.hpp"

#include <cmath>

using namespace levybsde;

namespace {

std::shared_ptr<const LevyMeasure> tempered_measure() {
    return std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
}

ProbeSettings small_settings() {
    ProbeSettings s;
    s.n_steps = 25;
    s.n_paths = 8000;
    s.truncation_k = 8;
    return s;
}

} // namespace

TEST_CASE("feynman_kac_probe: deterministic transport is reproduced to 1e-6") {
    auto spec = make_model("linear_additive", {{"sigma", 0.0}, {"beta", 0.0}},
                           std::make_shared<const LevyMeasure>(LevyMeasure::zero()));
    ProbeSettings s = small_settings();
    s.n_paths = 64;
    s.basis.degree = 0;
    s.with_markov_reference = false; // deterministic paths have point support
    auto report = feynman_kac_probe(spec, {{0.0, {0.5}}, {0.25, {-1.0}}}, s);
    for (const auto& row : report.artifacts[0].rows) {
        double t = row[0], x = row[1], estimate = row[3];
        CHECK(estimate == doctest::Approx(x + 0.1 * (1.0 - t)).epsilon(1e-6));
    }
}

TEST_CASE("feynman_kac_probe: anchor value within 3 SE and Markov consistency") {
    auto spec = make_model("linear_additive", {}, tempered_measure());
    ProbeSettings s = small_settings();
    s.n_paths = 20000;
    s.n_steps = 50;
    auto report = feynman_kac_probe(spec, {{0.0, {0.0}}, {0.0, {1.0}}, {0.5, {0.5}}}, s);
    CHECK(report.pass);
    for (const auto& row : report.artifacts[0].rows) {
        double t = row[0], x = row[1], estimate = row[3], se = row[4];
        CHECK(std::abs(estimate - (x + 0.1 * (1.0 - t))) <= 3.0 * se + 1e-6);
    }
}

TEST_CASE("feynman_kac_probe: independent seeds agree within combined 3 SE") {
    auto spec = make_model("linear_additive", {}, tempered_measure());
    ProbeSettings s = small_settings();
    s.with_markov_reference = false;
    auto r1 = feynman_kac_probe(spec, {{0.0, {0.5}}}, s);
    s.seed = 999111;
    auto r2 = feynman_kac_probe(spec, {{0.0, {0.5}}}, s);
    double e1 = r1.artifacts[0].rows[0][3], se1 = r1.artifacts[0].rows[0][4];
    double e2 = r2.artifacts[0].rows[0][3], se2 = r2.artifacts[0].rows[0][4];
    CHECK(std::abs(e1 - e2) <= 3.0 * (se1 + se2));
}

TEST_CASE("jump_representation_check: affine case is exact up to regression noise") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::finite_uniform(2.0, 1.0));
    auto spec = make_model("linear_additive", {}, measure); // g affine, h = 0, beta state-free
    auto tm = truncate(*measure, 1);
    auto grid = TimeGrid::uniform(0.0, 1.0, 25);
    double x0[1] = {0.5};
    auto bundle = simulate(spec, tm, 0.0, x0, grid, 30000, 808);
    auto sol = solve_lsmc(spec, bundle, RegressionBasis{}, QEstimator::Martingale);
    auto report = jump_representation_check(spec, sol, bundle, 1e-2);
    CHECK(report.pass);
    CHECK(report.statistics.at("mse") <= 1e-2);

    // Doubling the path count must not increase the error (10% slack).
    auto bundle2 = simulate(spec, tm, 0.0, x0, grid, 60000, 808);
    auto sol2 = solve_lsmc(spec, bundle2, RegressionBasis{}, QEstimator::Martingale);
    auto report2 = jump_representation_check(spec, sol2, bundle2, 1e-2);
    CHECK(report2.statistics.at("mse") <= report.statistics.at("mse") * 1.10);
}

TEST_CASE("jump_representation_check: zero measure reports zero error") {
    auto spec = make_model("linear_additive", {},
                           std::make_shared<const LevyMeasure>(LevyMeasure::zero()));
    auto tm = truncate(*spec.measure, 1);
    auto grid = TimeGrid::uniform(0.0, 1.0, 10);
    double x0[1] = {0.0};
    auto bundle = simulate(spec, tm, 0.0, x0, grid, 2000, 5);
    auto sol = solve_lsmc(spec, bundle, RegressionBasis{}, QEstimator::Martingale);
    auto report = jump_representation_check(spec, sol, bundle);
    CHECK(report.pass);
    CHECK(report.statistics.at("mse") == 0.0);
}

TEST_CASE("jump_representation_check: representation-mode input is rejected") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::finite_uniform(1.0, 1.0));
    auto spec = make_model("linear_additive", {}, measure);
    auto tm = truncate(*measure, 1);
    auto grid = TimeGrid::uniform(0.0, 1.0, 5);
    double x0[1] = {0.0};
    auto bundle = simulate(spec, tm, 0.0, x0, grid, 1000, 2);
    auto sol = solve_lsmc(spec, bundle, RegressionBasis{}, QEstimator::Representation);
    CHECK_THROWS_AS(jump_representation_check(spec, sol, bundle), EstimatorUnavailable);
}

TEST_CASE("u_class_check: quadratic field fits (C, p) near (1, 1)") {
    auto u = ValueField::from_function(
        1, {0.0, 1.0}, {{-4.0, 4.0, 161}},
        [](int, double, std::span<const double> x) { return x[0] * x[0]; });
    Box box;
    box.lo = {-4.0};
    box.hi = {4.0};
    auto report = u_class_check(u, box, 4000);
    CHECK(report.pass);
    CHECK(report.statistics.at("p") == doctest::Approx(1.0).epsilon(0.25));
    CHECK(report.statistics.at("C") == doctest::Approx(1.0).epsilon(0.35));
}

TEST_CASE("u_class_check: constant field fits C near 0") {
    auto u = ValueField::from_function(1, {0.0, 1.0}, {{-4.0, 4.0, 33}},
                                       [](int, double, std::span<const double>) { return 5.5; });
    Box box;
    box.lo = {-4.0};
    box.hi = {4.0};
    auto report = u_class_check(u, box, 1000);
    CHECK(report.pass);
    CHECK(report.statistics.at("C") <= 1e-10);
}

TEST_CASE("up_moment_check: zero measure gives an identically zero statistic") {
    auto spec = make_model("linear_additive", {},
                           std::make_shared<const LevyMeasure>(LevyMeasure::zero()));
    ProbeSettings s = small_settings();
    s.n_paths = 2000;
    auto report = up_moment_check(spec, {0.0, 1.0, 2.0}, 2, s);
    CHECK(report.pass);
    for (const auto& row : report.artifacts[0].rows) CHECK(row[1] == 0.0);
}

TEST_CASE("up_moment_check: constant field makes the jump channel vanish") {
    // h = 0 and constant terminal give a constant value function, whose
    // representation increments are zero.
    auto spec = make_model("linear_additive", {}, tempered_measure());
    spec.terminal = {[](std::span<const double>) { return 2.0; }};
    ProbeSettings s = small_settings();
    s.n_paths = 2000;
    auto report = up_moment_check(spec, {0.0, 1.0}, 2, s);
    CHECK(report.pass);
    for (const auto& row : report.artifacts[0].rows) CHECK(row[1] <= 1e-10);
}

TEST_CASE("up_moment_check: finite statistics and stable fit on the anchor model") {
    auto spec = make_model("linear_additive", {}, tempered_measure());
    ProbeSettings s = small_settings();
    s.n_paths = 6000;
    auto report = up_moment_check(spec, {0.0, 1.0, 2.0, 4.0}, 2, s);
    CHECK(report.pass);
    for (const auto& row : report.artifacts[0].rows) {
        CHECK(std::isfinite(row[1]));
        CHECK(row[1] > 0.0);
    }
}

TEST_CASE("uniqueness_fixed_point: q-independent driver converges immediately") {
    auto spec = make_model("linear_additive", {}, tempered_measure()); // h = 0
    ProbeSettings s = small_settings();
    s.n_paths = 4000;
    auto u0 = ValueField::from_function(
        1, {0.0, 1.0}, {{-4.0, 4.0, 21}},
        [](int, double, std::span<const double> x) { return std::cos(x[0]); });
    auto report = uniqueness_fixed_point(spec, u0, 10, s);
    CHECK(report.pass);
    CHECK(report.statistics.at("outer_iterations") <= 2);
}

TEST_CASE("uniqueness_fixed_point: two initializations reach the same limit") {
    auto spec = make_model("coupled_sine", {}, tempered_measure());
    ProbeSettings s = small_settings();
    s.n_paths = 8000;
    auto zero0 = ValueField::from_function(
        2, {0.0, 1.0}, {{-4.0, 4.0, 21}},
        [](int, double, std::span<const double>) { return 0.0; });
    auto pert0 = ValueField::from_function(
        2, {0.0, 1.0}, {{-4.0, 4.0, 21}},
        [](int c, double, std::span<const double> x) { return 0.5 * std::sin(x[0] + c); });
    auto ra = uniqueness_fixed_point(spec, zero0, 10, s);
    auto rb = uniqueness_fixed_point(spec, pert0, 10, s);
    CHECK(ra.pass);
    CHECK(rb.pass);
    // Both runs report their limit distance to the same direct solution.
    double tol = ra.statistics.at("tolerance");
    CHECK(ra.statistics.at("distance_to_direct") <= tol);
    CHECK(rb.statistics.at("distance_to_direct") <= tol);
}
