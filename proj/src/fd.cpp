#include "levybsde/fd.hpp"

#include "levybsde/errors.hpp"
#include "levybsde/linalg.hpp"
#include "levybsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace levybsde {

namespace {

void check_problem(const FdProblem& problem) {
    const auto& d = problem.spec.dims;
    if (d.state_k != 1 || d.brownian_d != 1 || d.mark_l != 1)
        throw ConfigError("finite-difference solver requires state, Brownian and mark dimension 1");
    if (d.components_m > 2)
        throw ConfigError("finite-difference solver handles at most two components");
    if (problem.nx < 7 || problem.nt < 2) throw ConfigError("fd grid too small");
}

} // namespace

ValueField solve_fd(const FdProblem& problem) {
    check_problem(problem);
    const auto& spec = problem.spec;
    spec.check_consistent();
    const int m = spec.dims.components_m;
    const int nx = problem.nx;
    const int nt = problem.nt;
    const double L = problem.box_half_width;
    const double dt = spec.horizon / nt;
    const ValueField::Axis axis{-L, L, nx};
    const double dx = axis.dx();

    // CFL-type bound for the explicit nonlocal part: the truncated tail mass
    // acts as a zeroth-order coefficient, plus the driver slope.
    double x_center[1] = {0.0};
    double lambda_fd = 0.0;
    if (!spec.measure->is_zero()) {
        double eps = taylor_cut_radius(spec, 0.5 * spec.horizon, x_center, dx);
        lambda_fd = measure_mass_above(*spec.measure, eps);
    }
    double c_h = 0.0;
    {
        Box box;
        box.lo.assign(static_cast<std::size_t>(m + 2), -3.0);
        box.hi.assign(static_cast<std::size_t>(m + 2), 3.0);
        std::vector<int> active(static_cast<std::size_t>(m + 2));
        for (std::size_t c = 0; c < active.size(); ++c) active[c] = static_cast<int>(c);
        for (int i = 0; i < m; ++i) {
            auto fn = [&](std::span<const double> pt) {
                std::span<const double> y(pt.data(), static_cast<std::size_t>(m));
                std::span<const double> z(pt.data() + m, 1);
                return spec.driver[static_cast<std::size_t>(i)](0.5 * spec.horizon, x_center, y, z,
                                                                pt[static_cast<std::size_t>(m) + 1]);
            };
            c_h = std::max(c_h, estimate_lipschitz(fn, box, active, 800,
                                                   static_cast<std::uint64_t>(99 + i)));
        }
    }
    if (dt * (lambda_fd + c_h) >= 1.0)
        throw CflViolation("dt * (lambda_fd + C_h) = " + std::to_string(dt * (lambda_fd + c_h)) +
                           " >= 1; refine the time grid or coarsen the jump cut");

    // Nonlocal sources are borrowed from the deepest node whose whole jump
    // range x + beta stays inside the box: evaluating them closer to the edge
    // would mix in the clamp extension and feed a spurious kink back into the
    // march.
    const double beta_reach = jump_size_envelope(spec, 0.5 * spec.horizon, x_center);
    int nl_margin = std::clamp(static_cast<int>(std::ceil(beta_reach / dx)) + 3, 3, nx / 3);

    std::vector<double> t_nodes(static_cast<std::size_t>(nt) + 1);
    for (int n = 0; n <= nt; ++n) t_nodes[static_cast<std::size_t>(n)] = spec.horizon * n / nt;
    ValueField out(m, t_nodes, {axis});

    for (int i = 0; i < m; ++i)
        for (int idx = 0; idx < nx; ++idx) {
            double x[1] = {axis.node(idx)};
            out.value_at(i, nt, static_cast<std::size_t>(idx)) =
                spec.terminal[static_cast<std::size_t>(i)](x);
        }

    std::vector<double> slice(static_cast<std::size_t>(m) * nx);
    std::vector<double> rhs(static_cast<std::size_t>(m) * nx);
    std::vector<double> lower(static_cast<std::size_t>(nx) - 3);
    std::vector<double> diag(static_cast<std::size_t>(nx) - 2);
    std::vector<double> upper(static_cast<std::size_t>(nx) - 3);
    std::vector<double> sol(static_cast<std::size_t>(nx) - 2);

    for (int n = nt; n >= 1; --n) {
        const double tn = t_nodes[static_cast<std::size_t>(n)];
        const double tn1 = t_nodes[static_cast<std::size_t>(n) - 1];
        for (int i = 0; i < m; ++i)
            for (int idx = 0; idx < nx; ++idx)
                slice[static_cast<std::size_t>(i) * nx + idx] =
                    out.value_at(i, n, static_cast<std::size_t>(idx));

        // The known slice wrapped as a single-time field for the nonlocal ops.
        ValueField slice_field(m, {tn}, {axis});
        for (int i = 0; i < m; ++i)
            for (int idx = 0; idx < nx; ++idx)
                slice_field.value_at(i, 0, static_cast<std::size_t>(idx)) =
                    slice[static_cast<std::size_t>(i) * nx + idx];
        slice_field.refit_envelope();

        parallel_for_blocks(static_cast<std::size_t>(nx), 32,
                            [&](std::size_t lo, std::size_t hi, std::size_t) {
            std::vector<double> yv(static_cast<std::size_t>(m));
            for (std::size_t idx = lo; idx < hi; ++idx) {
                double x[1] = {axis.node(static_cast<int>(idx))};
                int idx_nl = std::clamp(static_cast<int>(idx), nl_margin, nx - 1 - nl_margin);
                double x_nl[1] = {axis.node(idx_nl)};
                for (int i = 0; i < m; ++i)
                    yv[static_cast<std::size_t>(i)] = slice[static_cast<std::size_t>(i) * nx + idx];
                for (int i = 0; i < m; ++i) {
                    double kv = spec.measure->is_zero()
                                    ? 0.0
                                    : eval_K(slice_field, spec, tn, x_nl, i, problem.nonlocal_quad);
                    double coupling = 0.0;
                    if (spec.uses_q(i) && !spec.measure->is_zero()) {
                        coupling =
                            spec.coupling == CouplingMode::GammaIntegral
                                ? eval_B(slice_field, i, spec, tn, x_nl, problem.nonlocal_quad)
                                : eval_B_norm(slice_field, i, spec, tn, x_nl,
                                              problem.nonlocal_quad);
                    }
                    double du;
                    if (idx == 0)
                        du = (slice[static_cast<std::size_t>(i) * nx + 1] -
                              slice[static_cast<std::size_t>(i) * nx]) /
                             dx;
                    else if (idx + 1 == static_cast<std::size_t>(nx))
                        du = (slice[static_cast<std::size_t>(i) * nx + idx] -
                              slice[static_cast<std::size_t>(i) * nx + idx - 1]) /
                             dx;
                    else
                        du = (slice[static_cast<std::size_t>(i) * nx + idx + 1] -
                              slice[static_cast<std::size_t>(i) * nx + idx - 1]) /
                             (2.0 * dx);
                    double sig[1];
                    spec.diffusion(tn, x, sig);
                    double z[1] = {sig[0] * du};
                    double hv = spec.driver[static_cast<std::size_t>(i)](tn, x, yv, z, coupling);
                    rhs[static_cast<std::size_t>(i) * nx + idx] =
                        slice[static_cast<std::size_t>(i) * nx + idx] + dt * (kv + hv);
                }
            }
        });

        // Implicit local part, one tridiagonal solve per component. Boundary
        // nodes track their neighbour's increment (the far field moves in
        // parallel with the interior; stationary solutions stay exact); the
        // second pass removes the first-order boundary lag the implicit
        // solve would otherwise spread inward.
        for (int i = 0; i < m; ++i) {
            double bd_lo = slice[static_cast<std::size_t>(i) * nx];
            double bd_hi = slice[static_cast<std::size_t>(i) * nx + nx - 1];
            for (int pass = 0; pass < 2; ++pass) {
                for (int idx = 1; idx + 1 < nx; ++idx) {
                    double x[1] = {axis.node(idx)};
                    double bv[1], sig[1];
                    spec.drift(tn1, x, bv);
                    spec.diffusion(tn1, x, sig);
                    double a = 0.5 * sig[0] * sig[0] / (dx * dx);
                    double c = 0.5 * bv[0] / dx;
                    double w_lo = -dt * (a - c);
                    double w_di = 1.0 + 2.0 * dt * a;
                    double w_hi = -dt * (a + c);
                    auto row = static_cast<std::size_t>(idx - 1);
                    diag[row] = w_di;
                    if (idx > 1) lower[row - 1] = w_lo;
                    if (idx + 2 < nx) upper[row] = w_hi;
                    double r = rhs[static_cast<std::size_t>(i) * nx + idx];
                    if (idx == 1) r -= w_lo * bd_lo;
                    if (idx + 2 == nx) r -= w_hi * bd_hi;
                    sol[row] = r;
                }
                tridiagonal_solve(lower, diag, upper, sol);
                bd_lo = slice[static_cast<std::size_t>(i) * nx] +
                        (sol[0] - slice[static_cast<std::size_t>(i) * nx + 1]);
                bd_hi = slice[static_cast<std::size_t>(i) * nx + nx - 1] +
                        (sol[static_cast<std::size_t>(nx) - 3] -
                         slice[static_cast<std::size_t>(i) * nx + nx - 2]);
            }
            for (int idx = 1; idx + 1 < nx; ++idx)
                out.value_at(i, n - 1, static_cast<std::size_t>(idx)) =
                    sol[static_cast<std::size_t>(idx - 1)];
            out.value_at(i, n - 1, 0) = bd_lo;
            out.value_at(i, n - 1, static_cast<std::size_t>(nx) - 1) = bd_hi;
        }
    }
    out.refit_envelope();
    return out;
}

double residual(const ValueField& u, const ModelSpec& spec, double t, std::span<const double> x,
                int i, ResidualDefinition def) {
    spec.check_consistent();
    if (u.state_dim() != 1 || spec.dims.state_k != 1)
        throw ConfigError("residual is evaluated on 1D lattices");
    const auto& ts = u.t_nodes();
    if (ts.size() < 3) throw GridMismatch("residual needs at least three time nodes");
    double dt_lat = ts[1] - ts[0];
    if (t < ts.front() + 0.5 * dt_lat || t > ts.back() - 0.5 * dt_lat)
        throw GridMismatch("residual probe must be interior in time");
    const auto& axis = u.axes()[0];
    double dx = axis.dx();
    if (x[0] < axis.lo + 2.5 * dx || x[0] > axis.hi - 2.5 * dx)
        throw GridMismatch("residual probe must be interior in space");

    double xp[1] = {x[0]};
    double ut = (u.eval(i, t + dt_lat, xp) - u.eval(i, t - dt_lat, xp)) / (2.0 * dt_lat);

    auto dx_at = [&](double h) {
        double xa[1] = {x[0] + h}, xb[1] = {x[0] - h};
        return (u.eval(i, t, xa) - u.eval(i, t, xb)) / (2.0 * h);
    };
    double d1 = dx_at(dx), d2 = dx_at(2.0 * dx);
    double denom = std::max({1.0, std::abs(d1), std::abs(d2)});
    if (std::abs(d1 - d2) > 1e-3 * denom)
        throw IllConditionedDerivative("residual: gradient disagrees across stencil widths");
    double xa[1] = {x[0] + dx}, xb[1] = {x[0] - dx};
    double uxx = (u.eval(i, t, xa) - 2.0 * u.eval(i, t, xp) + u.eval(i, t, xb)) / (dx * dx);

    double bv[1], sig[1];
    spec.drift(t, x, bv);
    spec.diffusion(t, x, sig);
    double kv = spec.measure->is_zero() ? 0.0 : eval_K(u, spec, t, x, i);
    double coupling = 0.0;
    if (spec.uses_q(i) && !spec.measure->is_zero()) {
        // A lattice field is its own (only) smooth test function, so both
        // readings of the coupling term act on the same object here.
        (void)def;
        coupling = spec.coupling == CouplingMode::GammaIntegral ? eval_B(u, i, spec, t, x)
                                                                : eval_B_norm(u, i, spec, t, x);
    }
    std::vector<double> yv(static_cast<std::size_t>(spec.dims.components_m));
    for (int c = 0; c < spec.dims.components_m; ++c)
        yv[static_cast<std::size_t>(c)] = u.eval(c, t, x);
    double z[1] = {sig[0] * d1};
    double hv = spec.driver[static_cast<std::size_t>(i)](t, x, yv, z, coupling);
    return -ut - bv[0] * d1 - 0.5 * sig[0] * sig[0] * uxx - kv - hv;
}

} // namespace levybsde
