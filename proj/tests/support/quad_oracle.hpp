#pragma once

// Independent quadrature oracle for the test suites. Deliberately built on a
// different discretization than the library (adaptive Simpson in the
// log-radius variable instead of geometric Gauss-Legendre shells) so that
// agreement between the two is meaningful evidence.

#include "levybsde/levy.hpp"

#include <cmath>
#include <functional>

namespace levybsde::testing {

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol, int depth = 48) {
    if (!(b > a)) return 0.0;
    double m = 0.5 * (a + b);
    double fa = f(a), fm = f(m), fb = f(b);
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

// Integral of f(r) dr over [lo, hi] through the substitution r = exp(u).
inline double oracle_radial(const std::function<double(double)>& f, double lo, double hi,
                            double tol = 1e-12) {
    if (!(hi > lo) || !(lo > 0.0)) return 0.0;
    auto g = [&](double u) {
        double r = std::exp(u);
        return f(r) * r;
    };
    // Split at r=1 where (1 ^ r) integrands kink.
    double total = 0.0;
    if (lo < 1.0 && hi > 1.0) {
        total += adaptive_simpson(g, std::log(lo), 0.0, tol);
        total += adaptive_simpson(g, 0.0, std::log(hi), tol);
    } else {
        total += adaptive_simpson(g, std::log(lo), std::log(hi), tol);
    }
    return total;
}

// Integral of phi against the measure over {lo <= |e| <= support_radius}.
inline double oracle_levy_range(const LevyMeasure& m,
                                const std::function<double(std::span<const double>)>& phi,
                                double lo, double tol = 1e-12) {
    if (m.is_zero()) return 0.0;
    return oracle_radial([&](double r) { return m.radial_integrand(r, phi); }, lo,
                         m.support_radius(), tol);
}

// Full-measure integral with a decay-order tail closure below 2^-60.
inline double oracle_levy(const LevyMeasure& m,
                          const std::function<double(std::span<const double>)>& phi, int decay_pow,
                          double tol = 1e-12) {
    if (m.is_zero()) return 0.0;
    const double floor_r = std::ldexp(1.0, -60);
    double outer = oracle_levy_range(m, phi, floor_r, tol);
    double tail = floor_r * m.radial_integrand(floor_r, phi) /
                  (static_cast<double>(decay_pow) - m.alpha());
    return outer + tail;
}

} // namespace levybsde::testing
