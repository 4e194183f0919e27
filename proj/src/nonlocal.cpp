#include "levybsde/nonlocal.hpp"

#include "levybsde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace levybsde {

namespace {

double range_integral(const LevyMeasure& m,
                      const std::function<double(std::span<const double>)>& phi, double lo,
                      double hi, const QuadSpec& spec) {
    return shell_integrate([&](double r) { return m.radial_integrand(r, phi); }, lo, hi, spec);
}

// Central differences on the lattice stencil, checked across two widths.
void gradient_checked(const ValueField& u, int comp, double t, std::span<const double> x,
                      std::span<double> grad) {
    const auto& axes = u.axes();
    std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
    for (std::size_t d = 0; d < axes.size(); ++d) {
        double h = axes[d].dx();
        xp[d] = x[d] + h;
        xm[d] = x[d] - h;
        double d1 = (u.eval(comp, t, xp) - u.eval(comp, t, xm)) / (2.0 * h);
        xp[d] = x[d] + 2.0 * h;
        xm[d] = x[d] - 2.0 * h;
        double d2 = (u.eval(comp, t, xp) - u.eval(comp, t, xm)) / (4.0 * h);
        xp[d] = x[d];
        xm[d] = x[d];
        double denom = std::max({1.0, std::abs(d1), std::abs(d2)});
        if (std::abs(d1 - d2) > 1e-3 * denom)
            throw IllConditionedDerivative(
                "finite-difference gradient disagrees across stencil widths (" +
                std::to_string(d1) + " vs " + std::to_string(d2) + ")");
        grad[d] = d1;
    }
}

void hessian(const ValueField& u, int comp, double t, std::span<const double> x,
             std::vector<double>& h_out) {
    const auto& axes = u.axes();
    const std::size_t k = axes.size();
    h_out.assign(k * k, 0.0);
    std::vector<double> xa(x.begin(), x.end());
    double u0 = u.eval(comp, t, xa);
    for (std::size_t d = 0; d < k; ++d) {
        double h = axes[d].dx();
        xa[d] = x[d] + h;
        double up = u.eval(comp, t, xa);
        xa[d] = x[d] - h;
        double um = u.eval(comp, t, xa);
        xa[d] = x[d];
        h_out[d * k + d] = (up - 2.0 * u0 + um) / (h * h);
        for (std::size_t e = d + 1; e < k; ++e) {
            double he = axes[e].dx();
            xa[d] = x[d] + h;
            xa[e] = x[e] + he;
            double upp = u.eval(comp, t, xa);
            xa[e] = x[e] - he;
            double upm = u.eval(comp, t, xa);
            xa[d] = x[d] - h;
            double umm = u.eval(comp, t, xa);
            xa[e] = x[e] + he;
            double ump = u.eval(comp, t, xa);
            xa[d] = x[d];
            xa[e] = x[e];
            double v = (upp - upm - ump + umm) / (4.0 * h * he);
            h_out[d * k + e] = v;
            h_out[e * k + d] = v;
        }
    }
}

// Max of |beta|/(1 ^ |e|) over a dyadic probe ladder; converts mark radius
// into jump size.
double beta_envelope(const ModelSpec& spec, double t, std::span<const double> x) {
    const auto k = static_cast<std::size_t>(spec.dims.state_k);
    const auto l = static_cast<std::size_t>(spec.dims.mark_l);
    std::vector<double> beta(k), e(l, 0.0);
    double best = 0.0;
    for (int oct = 0; oct <= 20; oct += 2) {
        double r = std::ldexp(1.0, -oct);
        for (int sgn = 0; sgn < 2; ++sgn) {
            e.assign(l, 0.0);
            e[0] = sgn == 0 ? r : -r;
            spec.jump_coef(t, x, e, beta);
            double norm = 0.0;
            for (double v : beta) norm += v * v;
            best = std::max(best, std::sqrt(norm) / std::min(1.0, r));
        }
    }
    return best;
}

} // namespace

double jump_size_envelope(const ModelSpec& spec, double t, std::span<const double> x) {
    return beta_envelope(spec, t, x);
}

double measure_mass_above(const LevyMeasure& measure, double radius, const QuadSpec& quad) {
    if (measure.is_zero() || radius >= measure.support_radius()) return 0.0;
    return range_integral(measure, [](std::span<const double>) { return 1.0; }, radius,
                          measure.support_radius(), quad);
}

double taylor_cut_radius(const ModelSpec& spec, double t, std::span<const double> x,
                         double min_dx) {
    double cb = beta_envelope(spec, t, x);
    if (cb <= 0.0) return spec.measure->support_radius();
    return std::min(4.0 * min_dx / cb, 0.5 * spec.measure->support_radius());
}

double eval_B(const ValueField& u, int i, const ModelSpec& spec, double t,
              std::span<const double> x, const QuadSpec& quad) {
    spec.check_consistent();
    if (spec.coupling != CouplingMode::GammaIntegral)
        throw ConfigError("eval_B requires GammaIntegral coupling");
    const auto& measure = *spec.measure;
    if (measure.is_zero()) return 0.0;
    const auto k = static_cast<std::size_t>(spec.dims.state_k);
    const auto& gamma = spec.jump_weight[static_cast<std::size_t>(i)];
    double u0 = u.eval(i, t, x);
    std::vector<double> beta(k), xb(k);
    auto integrand = [&](std::span<const double> e) {
        spec.jump_coef(t, x, e, beta);
        for (std::size_t c = 0; c < k; ++c) xb[c] = x[c] + beta[c];
        return gamma(t, x, e) * (u.eval(i, t, xb) - u0);
    };
    return integrate(measure, integrand, IntegrandDecay::Quadratic, quad);
}

double eval_B_norm(const ValueField& u, int i, const ModelSpec& spec, double t,
                   std::span<const double> x, const QuadSpec& quad) {
    spec.check_consistent();
    const auto& measure = *spec.measure;
    if (measure.is_zero()) return 0.0;
    const auto k = static_cast<std::size_t>(spec.dims.state_k);
    double u0 = u.eval(i, t, x);
    std::vector<double> beta(k), xb(k);
    auto integrand = [&](std::span<const double> e) {
        spec.jump_coef(t, x, e, beta);
        for (std::size_t c = 0; c < k; ++c) xb[c] = x[c] + beta[c];
        double dv = u.eval(i, t, xb) - u0;
        return dv * dv;
    };
    return std::sqrt(
        std::max(0.0, integrate(measure, integrand, IntegrandDecay::Quadratic, quad)));
}

double eval_K(const ValueField& u, const ModelSpec& spec, double t, std::span<const double> x,
              int i, const QuadSpec& quad) {
    spec.check_consistent();
    const auto& measure = *spec.measure;
    if (measure.is_zero()) return 0.0;
    const auto k = static_cast<std::size_t>(spec.dims.state_k);

    std::vector<double> grad(k);
    gradient_checked(u, i, t, x, grad);
    std::vector<double> hess;
    hessian(u, i, t, x, hess);
    double hess_norm = 0.0;
    for (double v : hess) hess_norm += v * v;
    hess_norm = std::sqrt(hess_norm);

    double cb = beta_envelope(spec, t, x);
    double u0 = u.eval(i, t, x);
    std::vector<double> beta(k), xb(k);

    auto field_integrand = [&](std::span<const double> e) {
        spec.jump_coef(t, x, e, beta);
        double lin = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            xb[c] = x[c] + beta[c];
            lin += beta[c] * grad[c];
        }
        return u.eval(i, t, xb) - u0 - lin;
    };
    auto taylor_integrand = [&](std::span<const double> e) {
        spec.jump_coef(t, x, e, beta);
        double acc = 0.0;
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < k; ++c) acc += beta[r] * hess[r * k + c] * beta[c];
        return 0.5 * acc;
    };

    const double R = measure.support_radius();
    if (cb <= 0.0) return range_integral(measure, field_integrand, quad.floor_radius, R, quad);

    // Marks with jump size under one lattice cell are never resolvable by the
    // interpolation; up to four cells the second-order form is preferred when
    // its contribution bound stays under 1e-8 of the total.
    double dx = u.min_dx();
    double eps_wide = std::min(4.0 * dx / cb, 0.5 * R);
    double eps_tight = std::min(dx / cb, 0.5 * R);
    auto taylor_part = [&](double eps) {
        double outer_part = range_integral(measure, taylor_integrand, quad.floor_radius, eps, quad);
        double tail = quad.floor_radius *
                      measure.radial_integrand(quad.floor_radius, taylor_integrand) /
                      (2.0 - measure.alpha());
        return outer_part + tail;
    };
    double outer_wide = range_integral(measure, field_integrand, eps_wide, R, quad);
    double inner_wide = taylor_part(eps_wide);
    double bound_wide = 0.5 * hess_norm * cb * cb * small_ball_mass(measure, eps_wide, quad);
    double total = outer_wide + inner_wide;
    if (bound_wide > 1e-8 * std::max(1e-30, std::abs(total)) && eps_tight < eps_wide) {
        total = range_integral(measure, field_integrand, eps_tight, R, quad) +
                taylor_part(eps_tight);
    }
    if (!std::isfinite(total)) throw QuadratureFailure("eval_K produced a non-finite value");
    return total;
}

} // namespace levybsde
