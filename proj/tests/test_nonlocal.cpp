#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "levybsde/errors.hpp"
#include "levybsde/nonlocal.hpp"
#include "support/quad_oracle.hpp"

#include <cmath>

using namespace levybsde;
namespace oracle = levybsde::testing;

namespace {

ModelSpec plain_model(double beta_coef, double gamma_coef,
                      std::shared_ptr<const LevyMeasure> measure) {
    ModelSpec spec;
    spec.dims = {1, 1, 1, 1};
    spec.horizon = 1.0;
    spec.drift = [](double, std::span<const double>, std::span<double> o) { o[0] = 0.0; };
    spec.diffusion = [](double, std::span<const double>, std::span<double> o) { o[0] = 1.0; };
    spec.jump_coef = [beta_coef](double, std::span<const double>, std::span<const double> e,
                                 std::span<double> o) {
        o[0] = beta_coef * std::min(1.0, std::abs(e[0]));
    };
    spec.beta_state_independent = true;
    spec.terminal = {[](std::span<const double> x) { return x[0]; }};
    spec.driver = {[](double, std::span<const double>, std::span<const double>,
                      std::span<const double>, double) { return 0.0; }};
    spec.jump_weight = {[gamma_coef](double, std::span<const double>, std::span<const double> e) {
        return gamma_coef * std::min(1.0, std::abs(e[0]));
    }};
    spec.measure = std::move(measure);
    return spec;
}

ValueField field_1d(std::function<double(double, double)> f, double lo, double hi, int nx,
                    std::vector<double> t_nodes = {0.0, 1.0}) {
    return ValueField::from_function(
        1, std::move(t_nodes), {{lo, hi, nx}},
        [&](int, double t, std::span<const double> x) { return f(t, x[0]); });
}

const double kI1 = 1.114184806845; // oracle integral of (1^|e|)^2 d lambda, tempered(1,0.5,50)

} // namespace

TEST_CASE("eval_B: constant field and zero weight vanish") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto spec = plain_model(0.3, 1.0, measure);
    auto u_const = field_1d([](double, double) { return 3.25; }, -4.0, 4.0, 81);
    double x[1] = {0.5};
    CHECK(eval_B(u_const, 0, spec, 0.3, x) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    auto spec_nogamma = plain_model(0.3, 0.0, measure);
    auto u_lin = field_1d([](double, double xv) { return xv; }, -4.0, 4.0, 81);
    CHECK(eval_B(u_lin, 0, spec_nogamma, 0.3, x) == 0.0);
}

TEST_CASE("eval_B: linear field against the quadrature oracle") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    const double c = 0.3;
    auto spec = plain_model(c, 1.0, measure);
    auto u_lin = field_1d([](double, double xv) { return xv; }, -6.0, 6.0, 241);
    double x[1] = {0.25};
    // gamma * (u(x+beta)-u(x)) = (1^|e|) * c (1^|e|), an exact integrand.
    double expected = c * kI1;
    CHECK(eval_B(u_lin, 0, spec, 0.5, x) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("eval_B_norm: linear field and zero measure") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    const double c = 0.3;
    auto spec = plain_model(c, 1.0, measure);
    spec.coupling = CouplingMode::NormCoupling;
    auto u_lin = field_1d([](double, double xv) { return xv; }, -6.0, 6.0, 241);
    double x[1] = {0.25};
    CHECK(eval_B_norm(u_lin, 0, spec, 0.5, x) ==
          doctest::Approx(std::sqrt(c * c * kI1)).epsilon(1e-6));
    auto u_const = field_1d([](double, double) { return -2.0; }, -6.0, 6.0, 241);
    CHECK(eval_B_norm(u_const, 0, spec, 0.5, x) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

    auto zspec = plain_model(c, 1.0, std::make_shared<const LevyMeasure>(LevyMeasure::zero()));
    zspec.coupling = CouplingMode::NormCoupling;
    CHECK(eval_B_norm(u_lin, 0, zspec, 0.5, x) == 0.0);
}

TEST_CASE("eval_K: affine fields are annihilated") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto spec = plain_model(0.3, 1.0, measure);
    auto u_aff = field_1d([](double, double xv) { return 2.0 * xv - 0.7; }, -6.0, 6.0, 241);
    for (double xv : {-1.0, 0.0, 0.8, 2.0}) {
        double x[1] = {xv};
        CHECK(eval_K(u_aff, spec, 0.5, x, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    }
}

TEST_CASE("eval_K: quadratic field recovers the exact identity") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    const double c = 0.3;
    auto spec = plain_model(c, 1.0, measure);
    // For u = x^2 the Taylor remainder is exactly beta^2.
    double expected = c * c * kI1;
    double x0 = 0.4;
    auto u_sq = field_1d([](double, double xv) { return xv * xv; }, x0 - 1.2, x0 + 1.2, 48001);
    double x[1] = {x0};
    double v = eval_K(u_sq, spec, 0.5, x, 0);
    CHECK(v == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("eval_K: zero measure gives zero") {
    auto spec = plain_model(0.3, 1.0, std::make_shared<const LevyMeasure>(LevyMeasure::zero()));
    auto u_sq = field_1d([](double, double xv) { return xv * xv; }, -4.0, 4.0, 161);
    double x[1] = {0.2};
    CHECK(eval_K(u_sq, spec, 0.5, x, 0) == 0.0);
}

TEST_CASE("operators are linear in the field (interior probes)") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto spec = plain_model(0.05, 1.0, measure); // jumps stay well inside the box
    auto u = field_1d([](double t, double xv) { return std::sin(1.3 * xv) + 0.2 * t; }, -5.0, 5.0,
                      2001);
    auto v = field_1d([](double t, double xv) { return 0.5 * xv * xv - t * xv; }, -5.0, 5.0, 2001);
    const double a = 0.7, b = -1.3;
    auto w = ValueField::from_function(1, {0.0, 1.0}, {{-5.0, 5.0, 2001}},
                                       [&](int, double t, std::span<const double> x) {
                                           return a * (std::sin(1.3 * x[0]) + 0.2 * t) +
                                                  b * (0.5 * x[0] * x[0] - t * x[0]);
                                       });
    double x[1] = {0.3};
    double t = 0.5;
    double lhsB = eval_B(w, 0, spec, t, x);
    double rhsB = a * eval_B(u, 0, spec, t, x) + b * eval_B(v, 0, spec, t, x);
    CHECK(lhsB == doctest::Approx(rhsB).epsilon(1e-8));
    double lhsK = eval_K(w, spec, t, x, 0);
    double rhsK = a * eval_K(u, spec, t, x, 0) + b * eval_K(v, spec, t, x, 0);
    CHECK(lhsK == doctest::Approx(rhsK).epsilon(1e-6).scale(std::abs(lhsK) + 1e-6));
}

TEST_CASE("eval_B is invariant under constant shifts of the field") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto spec = plain_model(0.1, 1.0, measure);
    auto u = field_1d([](double, double xv) { return std::sin(xv); }, -5.0, 5.0, 801);
    auto u_shift =
        field_1d([](double, double xv) { return std::sin(xv) + 11.0; }, -5.0, 5.0, 801);
    double x[1] = {-0.6};
    CHECK(eval_B(u, 0, spec, 0.25, x) ==
          doctest::Approx(eval_B(u_shift, 0, spec, 0.25, x)).epsilon(1e-9));
}

TEST_CASE("eval_K is stable under lattice refinement on smooth fields") {
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto spec = plain_model(0.2, 1.0, measure);
    double x[1] = {0.1};
    auto coarse = field_1d([](double, double xv) { return std::cos(xv); }, -5.0, 5.0, 4001);
    auto fine = field_1d([](double, double xv) { return std::cos(xv); }, -5.0, 5.0, 8001);
    double vc = eval_K(coarse, spec, 0.5, x, 0);
    double vf = eval_K(fine, spec, 0.5, x, 0);
    CHECK(std::abs(vc - vf) < 2e-5 * std::max(1.0, std::abs(vf)));
}

TEST_CASE("eval_B flags fields without the local increment bound") {
    // A field with a jump discontinuity right at the probe point: the
    // increment does not vanish with |e|, violating the declared decay.
    auto measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5));
    auto spec = plain_model(0.5, 1.0, measure);
    spec.jump_weight = {[](double, std::span<const double>, std::span<const double> e) {
        return e[0] > 0 ? std::sqrt(std::min(1.0, std::abs(e[0]))) : 0.0;
    }};
    // Steep tanh kink scaled to look like a step at lattice resolution.
    auto u_step = field_1d([](double, double xv) { return std::tanh(5000.0 * xv); }, -4.0, 4.0,
                           200001);
    double x[1] = {0.0};
    CHECK_THROWS_AS(eval_B(u_step, 0, spec, 0.5, x), SlowDecay);
}

TEST_CASE("field evaluation respects the fitted growth envelope on the box") {
    auto u = ValueField::from_function(
        1, {0.0, 1.0}, {{-6.0, 6.0, 241}},
        [](int, double t, std::span<const double> x) { return (1.0 + 0.2 * t) * x[0] * x[0]; });
    const auto& env = u.envelope(0);
    CHECK(env.c > 0.0);
    for (std::size_t xi = 0; xi < u.x_count(); ++xi) {
        double x[1] = {u.axes()[0].node(static_cast<int>(xi))};
        for (double t : {0.0, 0.5, 1.0}) {
            double bound = env.c * (1.0 + std::pow(std::abs(x[0]), env.p));
            CHECK(std::abs(u.eval(0, t, x)) <= bound * (1.0 + 1e-12));
        }
    }
}
