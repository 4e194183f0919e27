#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "levybsde/errors.hpp"
#include "levybsde/model.hpp"
#include "support/quad_oracle.hpp"

#include <cmath>

using namespace levybsde;
namespace oracle = levybsde::testing;

namespace {

ModelSpec simple_model(std::function<double(double, std::span<const double>, std::span<const double>,
                                            std::span<const double>, double)>
                           h,
                       std::function<double(double, std::span<const double>, std::span<const double>)>
                           gamma,
                       std::shared_ptr<const LevyMeasure> measure) {
    ModelSpec spec;
    spec.dims = {1, 1, 1, 1};
    spec.horizon = 1.0;
    spec.drift = [](double, std::span<const double>, std::span<double> o) { o[0] = 0.0; };
    spec.diffusion = [](double, std::span<const double>, std::span<double> o) { o[0] = 1.0; };
    spec.jump_coef = [](double, std::span<const double>, std::span<const double> e,
                        std::span<double> o) { o[0] = std::min(1.0, std::abs(e[0])); };
    spec.terminal = {[](std::span<const double> x) { return x[0]; }};
    spec.driver = {std::move(h)};
    spec.jump_weight = {std::move(gamma)};
    spec.measure = std::move(measure);
    return spec;
}

double minabs1(std::span<const double> e) { return std::min(1.0, std::abs(e[0])); }

} // namespace

TEST_CASE("compose_generator: zero kernel and zero weight reduce to h(...,0)") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto h = [](double, std::span<const double>, std::span<const double> y,
                std::span<const double>, double q) { return 2.0 * y[0] + 7.0 * q + 1.0; };
    double x[1] = {0.3}, y[1] = {0.5}, z[1] = {0.1};

    auto spec = simple_model(h, [](double, std::span<const double>, std::span<const double> e) {
        return minabs1(e);
    }, measure);
    auto f = compose_generator(spec, 0);
    MarkKernel zero_kernel{[](std::span<const double>) { return 0.0; }, 0};
    CHECK(f(0.2, x, y, z, zero_kernel) == doctest::Approx(2.0).epsilon(1e-12));

    auto spec2 = simple_model(h, [](double, std::span<const double>, std::span<const double>) {
        return 0.0;
    }, measure);
    auto f2 = compose_generator(spec2, 0);
    MarkKernel lin{[](std::span<const double> e) { return minabs1(e); }, 0};
    CHECK(f2(0.2, x, y, z, lin) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("compose_generator: coupling scalar matches the quadrature oracle") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto h = [](double, std::span<const double>, std::span<const double>, std::span<const double>,
                double q) { return q; };
    auto spec = simple_model(h, [](double, std::span<const double>, std::span<const double> e) {
        return minabs1(e);
    }, measure);
    auto f = compose_generator(spec, 0);
    MarkKernel lin{[](std::span<const double> e) { return minabs1(e); }, 0};
    double x[1] = {0.0}, y[1] = {0.0}, z[1] = {0.0};
    double q = f(0.0, x, y, z, lin);
    double ref = oracle::oracle_levy(*measure, [](std::span<const double> e) {
        double v = minabs1(e);
        return v * v;
    }, 2);
    CHECK(q == doctest::Approx(ref).epsilon(1e-6));
    CHECK(ref == doctest::Approx(1.114184806845).epsilon(1e-8)); // frozen oracle value
}

TEST_CASE("compose_generator: Lipschitz in the kernel under the L2(lambda) norm") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    const double c_h = 3.0;
    auto h = [c_h](double, std::span<const double>, std::span<const double>,
                   std::span<const double>, double q) { return c_h * q; };
    auto spec = simple_model(h, [](double, std::span<const double>, std::span<const double> e) {
        return minabs1(e);
    }, measure);
    auto f = compose_generator(spec, 0);
    double gamma_l2 = std::sqrt(oracle::oracle_levy(*measure, [](std::span<const double> e) {
        double v = minabs1(e);
        return v * v;
    }, 2));
    double x[1] = {0.0}, y[1] = {0.0}, z[1] = {0.0};
    // Pairs from a fixed kernel basis.
    std::vector<std::pair<double, double>> coefs = {{1.0, 0.0}, {0.3, 0.7}, {-0.5, 0.4},
                                                    {0.0, 1.0}, {0.8, -0.8}};
    auto make_kernel = [](double a, double b) {
        return MarkKernel{[a, b](std::span<const double> e) {
                              double v = std::min(1.0, std::abs(e[0]));
                              return a * v + b * v * std::cos(2.0 * e[0]);
                          },
                          0};
    };
    for (std::size_t i = 0; i + 1 < coefs.size(); ++i) {
        auto k1 = make_kernel(coefs[i].first, coefs[i].second);
        auto k2 = make_kernel(coefs[i + 1].first, coefs[i + 1].second);
        double lhs = std::abs(f(0.1, x, y, z, k1) - f(0.1, x, y, z, k2));
        double dist = std::sqrt(oracle::oracle_levy(*measure, [&](std::span<const double> e) {
            double dv = k1.fn(e) - k2.fn(e);
            return dv * dv;
        }, 2));
        CHECK(lhs <= c_h * gamma_l2 * dist * (1.0 + 1e-9));
    }
}

TEST_CASE("coupling modes coincide exactly for the zero kernel") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto h = [](double, std::span<const double>, std::span<const double>, std::span<const double>,
                double q) { return std::sin(q) + 4.0; };
    auto spec = simple_model(h, [](double, std::span<const double>, std::span<const double> e) {
        return minabs1(e);
    }, measure);
    auto spec_norm = spec;
    spec_norm.coupling = CouplingMode::NormCoupling;
    auto f_int = compose_generator(spec, 0);
    auto f_norm = compose_generator(spec_norm, 0);
    MarkKernel zero_kernel{[](std::span<const double>) { return 0.0; }, 0};
    double x[1] = {1.0}, y[1] = {0.0}, z[1] = {0.0};
    CHECK(f_int(0.5, x, y, z, zero_kernel) == f_norm(0.5, x, y, z, zero_kernel));
}

TEST_CASE("estimate_lipschitz: linear, constant and oscillatory functions") {
    Box box;
    box.lo = {-1.0};
    box.hi = {1.0};
    int active[1] = {0};

    auto linear = [](std::span<const double> p) { return 3.0 * p[0] + 2.0; };
    double c_lin = estimate_lipschitz(linear, box, active, 2000);
    CHECK(c_lin <= 3.0 + 1e-9);
    CHECK(c_lin >= 3.0 - 1e-9);

    auto constant = [](std::span<const double>) { return 5.0; };
    CHECK(estimate_lipschitz(constant, box, active, 1000) == 0.0);

    // Dense 1D grid oracle for max |5 cos(5y)| on [-1,1] gives exactly 5.
    auto wave = [](std::span<const double> p) { return std::sin(5.0 * p[0]); };
    double c_wave = estimate_lipschitz(wave, box, active, 10000);
    CHECK(c_wave >= 4.9);
    CHECK(c_wave <= 5.0);
}

TEST_CASE("check_assumptions: constant-in-x jump coefficient passes with its constant") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto spec = simple_model(
        [](double, std::span<const double>, std::span<const double>, std::span<const double>,
           double) { return 0.0; },
        [](double, std::span<const double>, std::span<const double> e) { return minabs1(e); },
        measure);
    spec.jump_coef = [](double, std::span<const double>, std::span<const double> e,
                        std::span<double> o) { o[0] = 0.1 * std::min(1.0, std::abs(e[0])); };
    Box box;
    box.lo = {-3.0};
    box.hi = {3.0};
    auto report = check_assumptions(spec, box, 2000);
    CHECK(report.all_pass());
    auto* beta = report.find("beta_small_jump_bound");
    REQUIRE(beta != nullptr);
    CHECK(beta->constant == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("check_assumptions: tanh-weighted gamma passes with constant near 1") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto spec = simple_model(
        [](double, std::span<const double>, std::span<const double>, std::span<const double>,
           double) { return 0.0; },
        [](double, std::span<const double> x, std::span<const double> e) {
            return minabs1(e) * std::tanh(x[0]);
        },
        measure);
    Box box;
    box.lo = {-3.0};
    box.hi = {3.0};
    auto report = check_assumptions(spec, box, 2000);
    auto* gamma = report.find("gamma_small_jump_bound[0]");
    REQUIRE(gamma != nullptr);
    CHECK(gamma->pass);
    CHECK(gamma->constant > 0.9);
    CHECK(gamma->constant <= 1.0);
}

TEST_CASE("check_assumptions: jump coefficient without mark decay fails with a small-mark witness") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto spec = simple_model(
        [](double, std::span<const double>, std::span<const double>, std::span<const double>,
           double) { return 0.0; },
        [](double, std::span<const double>, std::span<const double> e) { return minabs1(e); },
        measure);
    spec.jump_coef = [](double, std::span<const double>, std::span<const double>,
                        std::span<double> o) { o[0] = 1.0; };
    Box box;
    box.lo = {-3.0};
    box.hi = {3.0};
    auto report = check_assumptions(spec, box, 2000);
    auto* beta = report.find("beta_small_jump_bound");
    REQUIRE(beta != nullptr);
    CHECK_FALSE(beta->pass);
    REQUIRE(beta->witness.size() == 3); // (t, x, e)
    CHECK(std::abs(beta->witness[2]) < 1e-3);
}

TEST_CASE("zoo: registry builds and describes all models") {
    for (const auto& name : model_names()) {
        auto spec = make_model(name, {});
        spec.check_consistent();
        CHECK(describe_model(name).size() > 40);
    }
    CHECK_THROWS_AS(make_model("nosuch", {}), UnknownName);
    CHECK_THROWS_AS(describe_model("nosuch"), UnknownName);
    CHECK(describe_model("coupled_sine").find("NON-MONOTONE") != std::string::npos);
    CHECK_THROWS_AS(make_model("linear_additive", {{"alpha_", 1.0}}), ConfigError);
}

TEST_CASE("zoo: coupled_sine assumptions hold on a desk box") {
    auto spec = make_model("coupled_sine", {});
    Box box;
    box.lo = {-3.0};
    box.hi = {3.0};
    auto report = check_assumptions(spec, box, 1500);
    CHECK(report.all_pass());
    CHECK(report.driver_lipschitz() > 0.3);
    CHECK(report.driver_lipschitz() < 1.2);
}
