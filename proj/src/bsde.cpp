#include "levybsde/bsde.hpp"

#include "levybsde/errors.hpp"
#include "levybsde/linalg.hpp"
#include "levybsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace levybsde {

namespace {

constexpr std::size_t kBlock = 1024;

// ---------------------------------------------------------------------------
// Fitted regression functions
// ---------------------------------------------------------------------------

struct FittedFn {
    RegressionBasis::Family family = RegressionBasis::Family::Polynomial;
    bool zero = false; // identically zero (used as the first Picard iterate)
    // Polynomial on standardized coordinates.
    std::vector<double> mean, scale;
    std::vector<std::vector<int>> powers; // [nb][k_active] with dim map
    std::vector<int> active_dims;
    std::vector<double> coeffs;
    // Local family (state dim 1): per-cell affine pieces.
    double lo = 0.0, hi = 1.0;
    int cells = 1;
    std::vector<double> cell_a, cell_b, cell_center;

    double eval(std::span<const double> x) const {
        if (zero) return 0.0;
        if (family == RegressionBasis::Family::Polynomial) {
            double acc = 0.0;
            for (std::size_t b = 0; b < coeffs.size(); ++b) {
                double term = coeffs[b];
                const auto& pw = powers[b];
                for (std::size_t a = 0; a < active_dims.size(); ++a) {
                    int p = pw[a];
                    if (p == 0) continue;
                    auto d = static_cast<std::size_t>(active_dims[a]);
                    double xs = (x[d] - mean[d]) / scale[d];
                    double v = xs;
                    for (int e = 1; e < p; ++e) v *= xs;
                    term *= v;
                }
                acc += term;
            }
            return acc;
        }
        double xv = std::clamp(x[0], lo, hi);
        int c = cells <= 1 ? 0
                           : std::min(cells - 1, static_cast<int>((xv - lo) / (hi - lo) * cells));
        auto ci = static_cast<std::size_t>(c);
        return cell_a[ci] + cell_b[ci] * (xv - cell_center[ci]);
    }
};

FittedFn zero_fn() {
    FittedFn f;
    f.zero = true;
    return f;
}

void enumerate_powers(int dims, int degree, std::vector<int>& cur, int used,
                      std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == dims) {
        out.push_back(cur);
        return;
    }
    for (int p = 0; p + used <= degree; ++p) {
        cur.push_back(p);
        enumerate_powers(dims, degree, cur, used + p, out);
        cur.pop_back();
    }
}

// One regression context per time step: basis evaluation at the step states,
// Gram factorization, multi-target solves.
class StepFit {
public:
    StepFit(const RegressionBasis& basis, const PathBundle& bundle, int node, int step_index)
        : basis_(basis), bundle_(bundle), node_(node), step_index_(step_index) {
        const auto n = static_cast<std::size_t>(bundle.n_paths);
        const auto k = static_cast<std::size_t>(bundle.state_dim);
        // Standardization and degeneracy detection.
        mean_.assign(k, 0.0);
        scale_.assign(k, 1.0);
        std::vector<double> mn(k, std::numeric_limits<double>::infinity());
        std::vector<double> mx(k, -std::numeric_limits<double>::infinity());
        for (std::size_t p = 0; p < n; ++p) {
            auto x = bundle.state(static_cast<int>(p), node);
            for (std::size_t d = 0; d < k; ++d) {
                mean_[d] += x[d];
                mn[d] = std::min(mn[d], x[d]);
                mx[d] = std::max(mx[d], x[d]);
            }
        }
        for (std::size_t d = 0; d < k; ++d) mean_[d] /= static_cast<double>(n);
        std::vector<double> var(k, 0.0);
        for (std::size_t p = 0; p < n; ++p) {
            auto x = bundle.state(static_cast<int>(p), node);
            for (std::size_t d = 0; d < k; ++d) var[d] += (x[d] - mean_[d]) * (x[d] - mean_[d]);
        }
        for (std::size_t d = 0; d < k; ++d) {
            scale_[d] = std::sqrt(var[d] / static_cast<double>(n));
            if (scale_[d] > 1e-12 * (1.0 + std::abs(mean_[d])))
                active_dims_.push_back(static_cast<int>(d));
            else
                scale_[d] = 1.0;
        }
        degenerate_ = active_dims_.empty();

        if (basis_.family == RegressionBasis::Family::Polynomial || degenerate_) {
            std::vector<int> cur;
            std::vector<std::vector<int>> pws;
            int adims = static_cast<int>(active_dims_.size());
            enumerate_powers(adims, degenerate_ ? 0 : basis_.degree, cur, 0, pws);
            powers_ = std::move(pws);
            nb_ = powers_.size();
        } else {
            if (bundle.state_dim != 1)
                throw ConfigError("local regression basis requires state dimension 1");
            lo_ = mn[0];
            hi_ = mx[0] + 1e-12 * (1.0 + std::abs(mx[0]));
            cells_ = std::max(1, basis_.cells);
            nb_ = static_cast<std::size_t>(2 * cells_);
        }
        if (nb_ > n / 20 && !(degenerate_ && nb_ == 1))
            throw ConfigError("regression basis count " + std::to_string(nb_) +
                              " exceeds n_paths/20");
        assemble();
    }

    bool degenerate() const { return degenerate_; }
    double condition() const { return condition_; }

    // Least squares fit of target(p); rms_out optionally receives the
    // prediction residual.
    FittedFn fit(const std::function<double(std::size_t)>& target, double* rms_out = nullptr) const {
        const auto n = static_cast<std::size_t>(bundle_.n_paths);
        std::vector<double> rhs(nb_, 0.0);
        const std::size_t nblocks = block_count(n, kBlock);
        std::vector<double> partial(nblocks * nb_, 0.0);
        parallel_for_blocks(n, kBlock, [&](std::size_t lo, std::size_t hi, std::size_t bi) {
            double* acc = partial.data() + bi * nb_;
            std::vector<double> row(nb_);
            for (std::size_t p = lo; p < hi; ++p) {
                basis_row(p, row);
                double tv = target(p);
                if (use_local()) {
                    std::size_t base = 2 * static_cast<std::size_t>(cell_of_path_[p]);
                    acc[base] += tv * row[base];
                    acc[base + 1] += tv * row[base + 1];
                } else {
                    for (std::size_t b = 0; b < nb_; ++b) acc[b] += row[b] * tv;
                }
            }
        });
        for (std::size_t bi = 0; bi < nblocks; ++bi)
            for (std::size_t b = 0; b < nb_; ++b) rhs[b] += partial[bi * nb_ + b];

        std::vector<double> coeffs(rhs);
        cholesky_solve_inplace(chol_, nb_, coeffs);

        FittedFn fn;
        if (use_local()) {
            fn.family = RegressionBasis::Family::Local;
            fn.lo = lo_;
            fn.hi = hi_;
            fn.cells = cells_;
            fn.cell_a.resize(static_cast<std::size_t>(cells_));
            fn.cell_b.resize(static_cast<std::size_t>(cells_));
            fn.cell_center.resize(static_cast<std::size_t>(cells_));
            for (int c = 0; c < cells_; ++c) {
                auto ci = static_cast<std::size_t>(c);
                fn.cell_a[ci] = coeffs[2 * ci];
                fn.cell_b[ci] = coeffs[2 * ci + 1];
                fn.cell_center[ci] = cell_center_[ci];
            }
        } else {
            fn.family = RegressionBasis::Family::Polynomial;
            fn.mean = mean_;
            fn.scale = scale_;
            fn.powers = powers_;
            fn.active_dims = active_dims_;
            fn.coeffs = std::move(coeffs);
        }
        if (rms_out) {
            const std::size_t nb2 = block_count(n, kBlock);
            std::vector<double> res(nb2, 0.0);
            parallel_for_blocks(n, kBlock, [&](std::size_t lo, std::size_t hi, std::size_t bi) {
                double acc = 0.0;
                for (std::size_t p = lo; p < hi; ++p) {
                    double pred = fn.eval(bundle_.state(static_cast<int>(p), node_));
                    double dv = target(p) - pred;
                    acc += dv * dv;
                }
                res[bi] += acc;
            });
            double total = std::accumulate(res.begin(), res.end(), 0.0);
            *rms_out = std::sqrt(total / static_cast<double>(n));
        }
        return fn;
    }

private:
    bool use_local() const {
        return basis_.family == RegressionBasis::Family::Local && !degenerate_;
    }

    void basis_row(std::size_t p, std::vector<double>& row) const {
        auto x = bundle_.state(static_cast<int>(p), node_);
        if (use_local()) {
            std::fill(row.begin(), row.end(), 0.0);
            std::size_t base = 2 * static_cast<std::size_t>(cell_of_path_[p]);
            row[base] = 1.0;
            row[base + 1] = x[0] - cell_center_[static_cast<std::size_t>(cell_of_path_[p])];
            return;
        }
        for (std::size_t b = 0; b < nb_; ++b) {
            double term = 1.0;
            const auto& pw = powers_[b];
            for (std::size_t a = 0; a < active_dims_.size(); ++a) {
                int pp = pw[a];
                if (pp == 0) continue;
                auto d = static_cast<std::size_t>(active_dims_[a]);
                double xs = (x[d] - mean_[d]) / scale_[d];
                double v = xs;
                for (int e = 1; e < pp; ++e) v *= xs;
                term *= v;
            }
            row[b] = term;
        }
    }

    void assemble() {
        const auto n = static_cast<std::size_t>(bundle_.n_paths);
        if (use_local()) {
            cell_of_path_.resize(n);
            cell_center_.resize(static_cast<std::size_t>(cells_));
            for (int c = 0; c < cells_; ++c)
                cell_center_[static_cast<std::size_t>(c)] =
                    lo_ + (hi_ - lo_) * (c + 0.5) / cells_;
            for (std::size_t p = 0; p < n; ++p) {
                double xv = bundle_.state(static_cast<int>(p), node_)[0];
                int c = std::min(cells_ - 1,
                                 std::max(0, static_cast<int>((xv - lo_) / (hi_ - lo_) * cells_)));
                cell_of_path_[p] = c;
            }
        }
        gram_.assign(nb_ * nb_, 0.0);
        const std::size_t nblocks = block_count(n, kBlock);
        std::vector<double> partial(nblocks * nb_ * nb_, 0.0);
        parallel_for_blocks(n, kBlock, [&](std::size_t lo, std::size_t hi, std::size_t bi) {
            double* acc = partial.data() + bi * nb_ * nb_;
            std::vector<double> row(nb_);
            for (std::size_t p = lo; p < hi; ++p) {
                basis_row(p, row);
                if (use_local()) {
                    std::size_t base = 2 * static_cast<std::size_t>(cell_of_path_[p]);
                    for (std::size_t a = base; a < base + 2; ++a)
                        for (std::size_t b = base; b <= a; ++b) acc[a * nb_ + b] += row[a] * row[b];
                } else {
                    for (std::size_t a = 0; a < nb_; ++a)
                        for (std::size_t b = 0; b <= a; ++b) acc[a * nb_ + b] += row[a] * row[b];
                }
            }
        });
        for (std::size_t bi = 0; bi < nblocks; ++bi)
            for (std::size_t a = 0; a < nb_; ++a)
                for (std::size_t b = 0; b <= a; ++b)
                    gram_[a * nb_ + b] += partial[bi * nb_ * nb_ + a * nb_ + b];
        for (std::size_t a = 0; a < nb_; ++a)
            for (std::size_t b = a + 1; b < nb_; ++b) gram_[a * nb_ + b] = gram_[b * nb_ + a];
        // Sparse local cells: empty cells leave zero blocks and cells with a
        // couple of paths leave rank-one blocks. A ridge on those blocks keeps
        // the factorization alive and pins their slope near zero.
        if (use_local()) {
            std::vector<std::size_t> counts(static_cast<std::size_t>(cells_), 0);
            for (int c : cell_of_path_) ++counts[static_cast<std::size_t>(c)];
            double dmax = 0.0;
            for (std::size_t a = 0; a < nb_; ++a) dmax = std::max(dmax, gram_[a * nb_ + a]);
            for (int c = 0; c < cells_; ++c) {
                if (counts[static_cast<std::size_t>(c)] >= 5) continue;
                auto base = 2 * static_cast<std::size_t>(c);
                gram_[base * nb_ + base] += 1e-6 * dmax + 1e-300;
                gram_[(base + 1) * nb_ + base + 1] += 1e-4 * dmax + 1e-300;
            }
        }
        condition_ = condition_estimate(gram_, nb_);
        if (condition_ > 1e10) {
            std::ostringstream os;
            os << "regression Gram matrix is singular at step " << step_index_
               << " (condition " << condition_ << ")";
            throw SingularRegression(os.str());
        }
        chol_ = cholesky(gram_, nb_);
        if (!chol_.ok) throw SingularRegression("Gram factorization failed at step " +
                                                std::to_string(step_index_));
    }

    RegressionBasis basis_;
    const PathBundle& bundle_;
    int node_;
    int step_index_;
    std::size_t nb_ = 1;
    bool degenerate_ = false;
    std::vector<double> mean_, scale_;
    std::vector<int> active_dims_;
    std::vector<std::vector<int>> powers_;
    double lo_ = 0.0, hi_ = 1.0;
    int cells_ = 1;
    std::vector<int> cell_of_path_;
    std::vector<double> cell_center_;
    std::vector<double> gram_;
    CholeskyResult chol_;
    double condition_ = 1.0;
};

// ---------------------------------------------------------------------------
// Jump-channel quadrature rules
// ---------------------------------------------------------------------------

// Full-measure rule for the representation estimator: shells down to the
// coarse floor plus a closure node carrying the below-floor tail of
// quadratic-decay integrands.
MarkRule full_mark_rule(const LevyMeasure& m, const QuadSpec& spec) {
    MarkRule rule;
    rule.dim = m.dim();
    if (m.is_zero()) return rule;
    if (m.dim() != 1)
        throw ConfigError("the jump-channel estimator requires mark dimension 1");
    RadialRule radial = shell_rule(spec.floor_radius, m.support_radius(), spec);
    for (std::size_t i = 0; i < radial.nodes.size(); ++i) {
        double r = radial.nodes[i], w = radial.weights[i];
        for (int b = 0; b < 2; ++b) {
            double dens = m.branch_density(b, r);
            if (dens <= 0.0) continue;
            rule.marks.push_back(b == 0 ? r : -r);
            rule.weights.push_back(w * dens);
        }
    }
    double f = spec.floor_radius;
    for (int b = 0; b < 2; ++b) {
        double dens = m.branch_density(b, f);
        if (dens <= 0.0) continue;
        rule.marks.push_back(b == 0 ? f : -f);
        rule.weights.push_back(f * dens / (2.0 - m.alpha()));
    }
    return rule;
}

struct StepFns {
    std::vector<FittedFn> cont;       // per component
    std::vector<FittedFn> zfit;       // per component * brownian dim
    std::vector<FittedFn> qfit_mart;  // martingale mode
    bool degenerate = false;
};

enum class SweepMode { Direct, FrozenChannels, ExogenousQ };

struct SweepContext {
    const ModelSpec* spec = nullptr;
    const PathBundle* bundle = nullptr;
    const RegressionBasis* basis = nullptr;
    const SolverSettings* settings = nullptr;
    QEstimator estimator = QEstimator::Representation;
    SweepMode mode = SweepMode::Direct;
    MarkRule rep_rule;          // full measure (representation estimator)
    MarkRule mart_rule;         // truncated measure (martingale estimator)
    const ValueField* u_prev = nullptr;          // ExogenousQ
    const std::vector<double>* frozen_z = nullptr; // FrozenChannels
    const std::vector<double>* frozen_q = nullptr;
    std::vector<std::size_t> path_event_begin;   // per (path, step): event ranges
    std::vector<std::size_t> path_event_end;
};

std::size_t yi(const BsdeSolution& s, int i, int p, int node) {
    return (static_cast<std::size_t>(i) * s.n_paths + p) * s.grid.n_nodes() + node;
}
std::size_t qi(const BsdeSolution& s, int i, int p, int step) {
    return (static_cast<std::size_t>(i) * s.n_paths + p) * s.grid.n_steps + step;
}
std::size_t zi(const BsdeSolution& s, int i, int p, int step, int d) {
    return ((static_cast<std::size_t>(i) * s.n_paths + p) * s.grid.n_steps + step) *
               s.brownian_dim +
           d;
}

void index_events_by_step(SweepContext& ctx) {
    const auto& b = *ctx.bundle;
    const auto n = static_cast<std::size_t>(b.n_paths);
    const auto steps = static_cast<std::size_t>(b.grid.n_steps);
    ctx.path_event_begin.assign(n * steps, 0);
    ctx.path_event_end.assign(n * steps, 0);
    for (std::size_t p = 0; p < n; ++p) {
        std::size_t ev = b.jump_begin(static_cast<int>(p));
        std::size_t end = b.jump_end(static_cast<int>(p));
        for (std::size_t j = 0; j < steps; ++j) {
            while (ev < end && static_cast<std::size_t>(b.jump_steps[ev]) < j) ++ev;
            std::size_t begin = ev;
            while (ev < end && static_cast<std::size_t>(b.jump_steps[ev]) == j) ++ev;
            ctx.path_event_begin[p * steps + j] = begin;
            ctx.path_event_end[p * steps + j] = ev;
            // events are step-sorted per path; ev now points past step j
        }
    }
}

// Representation field at step j: the freshly regressed continuation, or the
// next step's when the states have collapsed to a point (point-started
// bundles at their first node).
const FittedFn* rep_field(const std::vector<StepFns>& fns, int j, int n_steps, int i) {
    if (!fns[static_cast<std::size_t>(j)].degenerate)
        return &fns[static_cast<std::size_t>(j)].cont[static_cast<std::size_t>(i)];
    if (j + 1 < n_steps && !fns[static_cast<std::size_t>(j + 1)].cont.empty())
        return &fns[static_cast<std::size_t>(j + 1)].cont[static_cast<std::size_t>(i)];
    return &fns[static_cast<std::size_t>(j)].cont[static_cast<std::size_t>(i)];
}

// Scalar coupling channel at an arbitrary state via the representation rule.
double q_from_fields(const SweepContext& ctx, int i, double tj, std::span<const double> x,
                     const std::function<double(int, std::span<const double>)>& field_eval) {
    const auto& spec = *ctx.spec;
    if (ctx.rep_rule.count() == 0) return 0.0;
    const auto k = static_cast<std::size_t>(spec.dims.state_k);
    double acc = 0.0;
    std::vector<double> beta(k), xb(k);
    const bool norm_mode = spec.coupling == CouplingMode::NormCoupling;
    const auto& gamma = spec.jump_weight[static_cast<std::size_t>(i)];
    double u0 = field_eval(i, x);
    for (std::size_t nq = 0; nq < ctx.rep_rule.count(); ++nq) {
        auto e = ctx.rep_rule.mark(nq);
        spec.jump_coef(tj, x, e, beta);
        for (std::size_t c = 0; c < k; ++c) xb[c] = x[c] + beta[c];
        double dv = field_eval(i, xb) - u0;
        if (norm_mode)
            acc += ctx.rep_rule.weights[nq] * dv * dv;
        else
            acc += ctx.rep_rule.weights[nq] * gamma(tj, x, e) * dv;
    }
    return norm_mode ? std::sqrt(std::max(0.0, acc)) : acc;
}

// Backward sweep over steps [j_lo, j_hi); y at node j_hi must be in place.
// Fills y, z, q and the per-step fitted functions.
void sweep(SweepContext& ctx, BsdeSolution& sol, std::vector<StepFns>& fns, int j_lo, int j_hi,
           std::vector<StepDiagnostics>& diags) {
    const auto& spec = *ctx.spec;
    const auto& bundle = *ctx.bundle;
    const int m = spec.dims.components_m;
    const int d = spec.dims.brownian_d;
    const auto n = static_cast<std::size_t>(bundle.n_paths);
    const double dt = bundle.grid.dt();
    const auto steps = static_cast<std::size_t>(bundle.grid.n_steps);

    for (int j = j_hi - 1; j >= j_lo; --j) {
        const double tj = bundle.grid.node(j);
        StepFit fit(*ctx.basis, bundle, j, j);
        auto& sf = fns[static_cast<std::size_t>(j)];
        sf = StepFns{};
        sf.degenerate = fit.degenerate();
        double rms = 0.0;
        for (int i = 0; i < m; ++i) {
            double r = 0.0;
            sf.cont.push_back(fit.fit(
                [&](std::size_t p) { return sol.y[yi(sol, i, static_cast<int>(p), j + 1)]; }, &r));
            rms = std::max(rms, r);
        }
        // Brownian channel (refreshed every sweep; Picard freezes its copy).
        // Targets are centered on the continuation: E[cont(X_j) dB_j] = 0, so
        // centering is bias-free and removes the dominant noise term.
        for (int i = 0; i < m; ++i) {
            const auto& cont_i = sf.cont[static_cast<std::size_t>(i)];
            for (int dd = 0; dd < d; ++dd) {
                sf.zfit.push_back(fit.fit([&](std::size_t p) {
                    double centered = sol.y[yi(sol, i, static_cast<int>(p), j + 1)] -
                                      cont_i.eval(bundle.state(static_cast<int>(p), j));
                    return centered * bundle.brownian_increment(static_cast<int>(p), j)[dd] / dt;
                }));
            }
        }
        // Martingale jump channel: compensated jump functional regression.
        if (ctx.estimator == QEstimator::Martingale) {
            for (int i = 0; i < m; ++i) {
                const auto& gamma = spec.jump_weight[static_cast<std::size_t>(i)];
                const auto& cont_i = sf.cont[static_cast<std::size_t>(i)];
                sf.qfit_mart.push_back(fit.fit([&](std::size_t p) {
                    auto x = bundle.state(static_cast<int>(p), j);
                    double jump_sum = 0.0;
                    for (std::size_t ev = ctx.path_event_begin[p * steps + j];
                         ev < ctx.path_event_end[p * steps + j]; ++ev)
                        jump_sum += gamma(tj, x, bundle.jump_mark(ev));
                    double comp = 0.0;
                    for (std::size_t nq = 0; nq < ctx.mart_rule.count(); ++nq)
                        comp += ctx.mart_rule.weights[nq] * gamma(tj, x, ctx.mart_rule.mark(nq));
                    double centered =
                        sol.y[yi(sol, i, static_cast<int>(p), j + 1)] - cont_i.eval(x);
                    return centered * (jump_sum - dt * comp) / dt;
                }));
            }
        }
        diags[static_cast<std::size_t>(j)].condition = fit.condition();
        diags[static_cast<std::size_t>(j)].rms_residual = rms;
        diags[static_cast<std::size_t>(j)].degenerate = fit.degenerate();

        // Per-path channel values and the inner y fixed point.
        const std::size_t nblocks = block_count(n, kBlock);
        std::vector<std::string> errors(nblocks);
        parallel_for_blocks(n, kBlock, [&](std::size_t lo, std::size_t hi, std::size_t bi) {
            std::vector<double> ycur(static_cast<std::size_t>(m)), ynew(static_cast<std::size_t>(m));
            std::vector<double> qv(static_cast<std::size_t>(m));
            std::vector<double> cont0(static_cast<std::size_t>(m));
            std::vector<double> zbuf(static_cast<std::size_t>(m * d));
            auto field_eval = [&](int i, std::span<const double> xx) {
                return rep_field(fns, j, bundle.grid.n_steps, i)->eval(xx);
            };
            for (std::size_t p = lo; p < hi; ++p) {
                auto x = bundle.state(static_cast<int>(p), j);
                for (int i = 0; i < m; ++i) {
                    for (int dd = 0; dd < d; ++dd) {
                        // refreshed estimate, stored either way
                        sol.z[zi(sol, i, static_cast<int>(p), j, dd)] =
                            sf.zfit[static_cast<std::size_t>(i * d + dd)].eval(x);
                    }
                    double fresh = 0.0;
                    if (spec.uses_q(i) && ctx.mode != SweepMode::ExogenousQ) {
                        fresh = ctx.estimator == QEstimator::Martingale
                                    ? sf.qfit_mart[static_cast<std::size_t>(i)].eval(x)
                                    : q_from_fields(ctx, i, tj, x, field_eval);
                    }
                    double qval = 0.0;
                    if (spec.uses_q(i)) {
                        switch (ctx.mode) {
                            case SweepMode::FrozenChannels:
                                qval = (*ctx.frozen_q)[qi(sol, i, static_cast<int>(p), j)];
                                break;
                            case SweepMode::ExogenousQ:
                                qval = sol.q[qi(sol, i, static_cast<int>(p), j)];
                                break;
                            case SweepMode::Direct:
                                qval = fresh;
                                break;
                        }
                    }
                    qv[static_cast<std::size_t>(i)] = qval;
                    if (ctx.mode != SweepMode::ExogenousQ)
                        sol.q[qi(sol, i, static_cast<int>(p), j)] = fresh;
                    // y fixed-point seed: continuation value.
                    ycur[static_cast<std::size_t>(i)] =
                        sf.cont[static_cast<std::size_t>(i)].eval(x);
                }
                // Joint fixed point across components for the driver's
                // implicitness in y.
                bool converged = false;
                cont0 = ycur;
                for (int i = 0; i < m; ++i)
                    for (int dd = 0; dd < d; ++dd)
                        zbuf[static_cast<std::size_t>(i * d + dd)] =
                            ctx.mode == SweepMode::FrozenChannels
                                ? (*ctx.frozen_z)[zi(sol, i, static_cast<int>(p), j, dd)]
                                : sol.z[zi(sol, i, static_cast<int>(p), j, dd)];
                for (int pass = 0; pass < ctx.settings->inner_fixpoint_cap; ++pass) {
                    double change = 0.0, scale = 1.0;
                    for (int i = 0; i < m; ++i) {
                        std::span<const double> zspan(zbuf.data() + i * d,
                                                      static_cast<std::size_t>(d));
                        double hv = spec.driver[static_cast<std::size_t>(i)](
                            tj, x, ycur, zspan, qv[static_cast<std::size_t>(i)]);
                        ynew[static_cast<std::size_t>(i)] =
                            cont0[static_cast<std::size_t>(i)] + dt * hv;
                        change = std::max(change, std::abs(ynew[static_cast<std::size_t>(i)] -
                                                           ycur[static_cast<std::size_t>(i)]));
                        scale = std::max(scale, std::abs(ynew[static_cast<std::size_t>(i)]));
                    }
                    ycur = ynew;
                    if (change <= ctx.settings->inner_fixpoint_tol * scale) {
                        converged = true;
                        break;
                    }
                }
                if (!converged && errors[bi].empty()) {
                    std::ostringstream os;
                    os << "inner y fixed point failed to converge at step " << j << ", path " << p;
                    errors[bi] = os.str();
                }
                for (int i = 0; i < m; ++i)
                    sol.y[yi(sol, i, static_cast<int>(p), j)] = ycur[static_cast<std::size_t>(i)];
            }
        });
        for (const auto& e : errors)
            if (!e.empty()) throw NonConvergence(e);
    }
}

// Shared terminal condition: y at the last node is g(X_T) path by path.
void apply_terminal(const ModelSpec& spec, const PathBundle& bundle, BsdeSolution& sol) {
    const int m = spec.dims.components_m;
    const int n_nodes = bundle.grid.n_nodes();
    for (int i = 0; i < m; ++i) {
        const auto& g = spec.terminal[static_cast<std::size_t>(i)];
        for (int p = 0; p < bundle.n_paths; ++p)
            sol.y[yi(sol, i, p, n_nodes - 1)] = g(bundle.state(p, n_nodes - 1));
    }
}

BsdeSolution make_solution(const ModelSpec& spec, const PathBundle& bundle, QEstimator estimator) {
    BsdeSolution sol;
    sol.grid = bundle.grid;
    sol.components = spec.dims.components_m;
    sol.n_paths = bundle.n_paths;
    sol.brownian_dim = spec.dims.brownian_d;
    sol.estimator = estimator;
    sol.y.assign(static_cast<std::size_t>(sol.components) * bundle.n_paths * bundle.grid.n_nodes(),
                 0.0);
    sol.z.assign(static_cast<std::size_t>(sol.components) * bundle.n_paths * bundle.grid.n_steps *
                     sol.brownian_dim,
                 0.0);
    sol.q.assign(static_cast<std::size_t>(sol.components) * bundle.n_paths * bundle.grid.n_steps,
                 0.0);
    sol.diagnostics.assign(static_cast<std::size_t>(bundle.grid.n_steps), StepDiagnostics{});
    return sol;
}

// Lattice box from path-state quantiles, padded.
std::vector<ValueField::Axis> field_axes(const PathBundle& bundle, const SolverSettings& settings) {
    const int k = bundle.state_dim;
    std::vector<ValueField::Axis> axes;
    for (int dd = 0; dd < k; ++dd) {
        std::vector<double> sample;
        const std::size_t total =
            static_cast<std::size_t>(bundle.n_paths) * bundle.grid.n_nodes();
        // The stride must not alias the node count, or the subsample would
        // collapse onto a single grid node.
        std::size_t stride = std::max<std::size_t>(1, total / 20000);
        while (stride > 1 && std::gcd(stride, static_cast<std::size_t>(bundle.grid.n_nodes())) != 1)
            ++stride;
        for (std::size_t idx = 0; idx < total; idx += stride)
            sample.push_back(bundle.states[idx * static_cast<std::size_t>(k) +
                                           static_cast<std::size_t>(dd)]);
        std::sort(sample.begin(), sample.end());
        double qlo = sample[static_cast<std::size_t>(0.01 * (sample.size() - 1))];
        double qhi = sample[static_cast<std::size_t>(0.99 * (sample.size() - 1))];
        double pad = settings.field_padding * std::max(qhi - qlo, 1e-6) + 0.25;
        axes.push_back({qlo - pad, qhi + pad, settings.field_nx});
    }
    return axes;
}

// Evaluate the step-j y-function at an arbitrary state (the same formula the
// pathwise values follow), for the u_fields lattice.
struct FieldFiller {
    const SweepContext* ctx;
    const std::vector<StepFns>* fns;
    const BsdeSolution* sol;

    double y_value(int i_target, int j, std::span<const double> x) const {
        const auto& spec = *ctx->spec;
        const int m = spec.dims.components_m;
        const int d = spec.dims.brownian_d;
        const double dt = sol->grid.dt();
        const double tj = sol->grid.node(j);
        const auto& sf = (*fns)[static_cast<std::size_t>(j)];
        auto field_eval = [&](int i, std::span<const double> xx) {
            return rep_field(*fns, j, sol->grid.n_steps, i)->eval(xx);
        };
        std::vector<double> ycur(static_cast<std::size_t>(m)), qv(static_cast<std::size_t>(m));
        std::vector<double> zbuf(static_cast<std::size_t>(m * d));
        for (int i = 0; i < m; ++i) {
            ycur[static_cast<std::size_t>(i)] = sf.cont[static_cast<std::size_t>(i)].eval(x);
            for (int dd = 0; dd < d; ++dd)
                zbuf[static_cast<std::size_t>(i * d + dd)] =
                    sf.zfit[static_cast<std::size_t>(i * d + dd)].eval(x);
            double qval = 0.0;
            if (spec.uses_q(i)) {
                if (ctx->mode == SweepMode::ExogenousQ) {
                    qval = exo_q_at(i, tj, x);
                } else if (ctx->estimator == QEstimator::Martingale) {
                    qval = sf.qfit_mart[static_cast<std::size_t>(i)].eval(x);
                } else {
                    qval = q_from_fields(*ctx, i, tj, x, field_eval);
                }
            }
            qv[static_cast<std::size_t>(i)] = qval;
        }
        std::vector<double> cont0(ycur), ynew(static_cast<std::size_t>(m));
        for (int pass = 0; pass < ctx->settings->inner_fixpoint_cap; ++pass) {
            double change = 0.0, scale = 1.0;
            for (int i = 0; i < m; ++i) {
                std::span<const double> zspan(zbuf.data() + i * d, static_cast<std::size_t>(d));
                double hv = spec.driver[static_cast<std::size_t>(i)](
                    tj, x, ycur, zspan, qv[static_cast<std::size_t>(i)]);
                ynew[static_cast<std::size_t>(i)] = cont0[static_cast<std::size_t>(i)] + dt * hv;
                change = std::max(change, std::abs(ynew[static_cast<std::size_t>(i)] -
                                                   ycur[static_cast<std::size_t>(i)]));
                scale = std::max(scale, std::abs(ynew[static_cast<std::size_t>(i)]));
            }
            ycur = ynew;
            if (change <= ctx->settings->inner_fixpoint_tol * scale) break;
        }
        return ycur[static_cast<std::size_t>(i_target)];
    }

    double exo_q_at(int i, double tj, std::span<const double> x) const {
        const auto& spec = *ctx->spec;
        const auto k = static_cast<std::size_t>(spec.dims.state_k);
        if (ctx->rep_rule.count() == 0) return 0.0;
        const auto& gamma = spec.jump_weight[static_cast<std::size_t>(i)];
        std::vector<double> beta(k), xb(k);
        double u0 = ctx->u_prev->eval(i, tj, x);
        double acc = 0.0;
        for (std::size_t nq = 0; nq < ctx->rep_rule.count(); ++nq) {
            auto e = ctx->rep_rule.mark(nq);
            spec.jump_coef(tj, x, e, beta);
            for (std::size_t c = 0; c < k; ++c) xb[c] = x[c] + beta[c];
            acc += ctx->rep_rule.weights[nq] * gamma(tj, x, e) *
                   (ctx->u_prev->eval(i, tj, xb) - u0);
        }
        return acc;
    }
};

void fill_fields(SweepContext& ctx, const std::vector<StepFns>& fns, BsdeSolution& sol) {
    const auto& spec = *ctx.spec;
    const auto& bundle = *ctx.bundle;
    const int m = spec.dims.components_m;
    std::vector<double> t_nodes;
    for (int j = 0; j < bundle.grid.n_nodes(); ++j) t_nodes.push_back(bundle.grid.node(j));
    ValueField field(m, t_nodes, field_axes(bundle, *ctx.settings));
    FieldFiller filler{&ctx, &fns, &sol};
    const std::size_t nx = field.x_count();
    const int n_nodes = bundle.grid.n_nodes();
    parallel_for_blocks(nx, 64, [&](std::size_t lo, std::size_t hi, std::size_t) {
        std::vector<double> x(static_cast<std::size_t>(field.state_dim()));
        for (std::size_t xf = lo; xf < hi; ++xf) {
            field.x_of_flat(xf, x);
            for (int i = 0; i < m; ++i) {
                field.value_at(i, n_nodes - 1, xf) = spec.terminal[static_cast<std::size_t>(i)](x);
                for (int j = 0; j < n_nodes - 1; ++j)
                    field.value_at(i, j, xf) = filler.y_value(i, j, x);
            }
        }
    });
    field.refit_envelope();
    sol.u_fields = std::move(field);
    sol.regression_tolerance = 0.0;
    for (const auto& dg : sol.diagnostics)
        sol.regression_tolerance = std::max(sol.regression_tolerance, dg.rms_residual);
}

SweepContext make_context(const ModelSpec& spec, const PathBundle& bundle,
                          const RegressionBasis& basis, QEstimator estimator,
                          const SolverSettings& settings) {
    spec.check_consistent();
    if (bundle.state_dim != spec.dims.state_k || bundle.brownian_dim != spec.dims.brownian_d ||
        bundle.mark_dim != spec.dims.mark_l)
        throw GridMismatch("bundle dimensions do not match the model spec");
    SweepContext ctx;
    ctx.spec = &spec;
    ctx.bundle = &bundle;
    ctx.basis = &basis;
    ctx.settings = &settings;
    ctx.estimator = estimator;
    bool any_q = false;
    for (int i = 0; i < spec.dims.components_m; ++i) any_q = any_q || spec.uses_q(i);
    if (any_q && !spec.measure->is_zero()) {
        if (estimator == QEstimator::Martingale) {
            if (spec.coupling == CouplingMode::NormCoupling)
                throw EstimatorUnavailable(
                    "the martingale estimator applies to GammaIntegral coupling only");
            ctx.mart_rule = truncate(*spec.measure, bundle.truncation_k).mark_rule(settings.q_quad);
        }
        ctx.rep_rule = full_mark_rule(*spec.measure, settings.q_quad);
    }
    index_events_by_step(ctx);
    return ctx;
}

} // namespace

BsdeSolution solve_lsmc(const ModelSpec& spec, const PathBundle& bundle,
                        const RegressionBasis& basis, QEstimator estimator,
                        const SolverSettings& settings) {
    SweepContext ctx = make_context(spec, bundle, basis, estimator, settings);
    ctx.mode = SweepMode::Direct;
    BsdeSolution sol = make_solution(spec, bundle, estimator);
    apply_terminal(spec, bundle, sol);
    std::vector<StepFns> fns(static_cast<std::size_t>(bundle.grid.n_steps + 1));
    sweep(ctx, sol, fns, 0, bundle.grid.n_steps, sol.diagnostics);
    fill_fields(ctx, fns, sol);
    return sol;
}

BsdeSolution solve_frozen_nonlocal(const ModelSpec& spec, const PathBundle& bundle,
                                   const RegressionBasis& basis, const ValueField& u_prev,
                                   const SolverSettings& settings) {
    if (spec.coupling != CouplingMode::NormCoupling &&
        spec.coupling != CouplingMode::GammaIntegral)
        throw ConfigError("unknown coupling mode");
    if (spec.coupling == CouplingMode::NormCoupling)
        throw ConfigError("solve_frozen_nonlocal requires GammaIntegral coupling");
    SweepContext ctx = make_context(spec, bundle, basis, QEstimator::Representation, settings);
    ctx.mode = SweepMode::ExogenousQ;
    ctx.u_prev = &u_prev;
    BsdeSolution sol = make_solution(spec, bundle, QEstimator::Representation);
    apply_terminal(spec, bundle, sol);

    // Exogenous channel: evaluated from u_prev once, before the sweep.
    const int m = spec.dims.components_m;
    const auto n = static_cast<std::size_t>(bundle.n_paths);
    FieldFiller filler{&ctx, nullptr, &sol};
    for (int j = 0; j < bundle.grid.n_steps; ++j) {
        const double tj = bundle.grid.node(j);
        parallel_for_blocks(n, kBlock, [&](std::size_t lo, std::size_t hi, std::size_t) {
            for (std::size_t p = lo; p < hi; ++p) {
                auto x = bundle.state(static_cast<int>(p), j);
                for (int i = 0; i < m; ++i)
                    sol.q[qi(sol, i, static_cast<int>(p), j)] =
                        spec.uses_q(i) ? filler.exo_q_at(i, tj, x) : 0.0;
            }
        });
    }
    std::vector<StepFns> fns(static_cast<std::size_t>(bundle.grid.n_steps + 1));
    sweep(ctx, sol, fns, 0, bundle.grid.n_steps, sol.diagnostics);
    fill_fields(ctx, fns, sol);
    return sol;
}

BsdeSolution picard_subinterval(const ModelSpec& spec, const PathBundle& bundle,
                                const RegressionBasis& basis, const SolverSettings& settings) {
    SweepContext ctx = make_context(spec, bundle, basis, QEstimator::Representation, settings);
    BsdeSolution sol = make_solution(spec, bundle, QEstimator::Representation);
    apply_terminal(spec, bundle, sol);

    // Window length: (4 C^2)^-1 from the sampled driver Lipschitz constant.
    double delta = settings.picard_delta;
    if (delta <= 0.0) {
        Box box;
        box.lo.assign(static_cast<std::size_t>(spec.dims.state_k), 0.0);
        box.hi.assign(static_cast<std::size_t>(spec.dims.state_k), 0.0);
        auto axes = field_axes(bundle, settings);
        for (std::size_t dd = 0; dd < axes.size(); ++dd) {
            box.lo[dd] = axes[dd].lo;
            box.hi[dd] = axes[dd].hi;
        }
        auto report = check_assumptions(spec, box, 1200);
        double c_hat = report.driver_lipschitz();
        delta = c_hat > 1e-9 ? 1.0 / (4.0 * c_hat * c_hat)
                             : bundle.grid.horizon - bundle.grid.t0;
    }
    delta = std::min(delta, bundle.grid.horizon - bundle.grid.t0);
    const double dt = bundle.grid.dt();
    const int steps_per_window = std::max(1, static_cast<int>(std::floor(delta / dt + 1e-9)));

    const int m = spec.dims.components_m;
    const int d = spec.dims.brownian_d;
    std::vector<double> frozen_z(sol.z.size(), 0.0), frozen_q(sol.q.size(), 0.0);
    ctx.frozen_z = &frozen_z;
    ctx.frozen_q = &frozen_q;
    ctx.mode = SweepMode::FrozenChannels;

    std::vector<StepFns> fns(static_cast<std::size_t>(bundle.grid.n_steps + 1));
    std::vector<StepFns> prev_fns(static_cast<std::size_t>(bundle.grid.n_steps + 1));
    const auto n = static_cast<std::size_t>(bundle.n_paths);

    int j_hi = bundle.grid.n_steps;
    while (j_hi > 0) {
        int j_lo = std::max(0, j_hi - steps_per_window);
        std::vector<double> deltas;
        // Mark the previous iterate's fields as identically zero.
        for (int j = j_lo; j < j_hi; ++j) {
            prev_fns[static_cast<std::size_t>(j)] = StepFns{};
            for (int i = 0; i < m; ++i) prev_fns[static_cast<std::size_t>(j)].cont.push_back(zero_fn());
        }
        int iters = 0;
        for (int l = 1; l <= settings.picard_iteration_cap; ++l) {
            iters = l;
            sweep(ctx, sol, fns, j_lo, j_hi, sol.diagnostics);
            // Window norm of the channel change: Brownian part from the
            // refreshed z against the frozen one; jump part as the L2(lambda)
            // norm of the representation-field increment difference.
            const std::size_t nblocks = block_count(n, kBlock);
            std::vector<double> partial(nblocks, 0.0);
            parallel_for_blocks(n, kBlock, [&](std::size_t lo, std::size_t hi, std::size_t bi) {
                const auto k = static_cast<std::size_t>(spec.dims.state_k);
                std::vector<double> beta(k), xb(k);
                double acc = 0.0;
                for (std::size_t p = lo; p < hi; ++p) {
                    for (int j = j_lo; j < j_hi; ++j) {
                        double tj = bundle.grid.node(j);
                        auto x = bundle.state(static_cast<int>(p), j);
                        double term = 0.0;
                        for (int i = 0; i < m; ++i) {
                            for (int dd = 0; dd < d; ++dd) {
                                double dz =
                                    sol.z[zi(sol, i, static_cast<int>(p), j, dd)] -
                                    frozen_z[zi(sol, i, static_cast<int>(p), j, dd)];
                                term += dz * dz;
                            }
                            if (!spec.uses_q(i) || ctx.rep_rule.count() == 0) continue;
                            const auto* cur =
                                &fns[static_cast<std::size_t>(j)].cont[static_cast<std::size_t>(i)];
                            const auto* prv =
                                &prev_fns[static_cast<std::size_t>(j)]
                                     .cont[static_cast<std::size_t>(i)];
                            double u0 = cur->eval(x) - prv->eval(x);
                            double unorm = 0.0;
                            for (std::size_t nq = 0; nq < ctx.rep_rule.count(); ++nq) {
                                auto e = ctx.rep_rule.mark(nq);
                                spec.jump_coef(tj, x, e, beta);
                                for (std::size_t c = 0; c < k; ++c) xb[c] = x[c] + beta[c];
                                double dv = (cur->eval(xb) - prv->eval(xb)) - u0;
                                unorm += ctx.rep_rule.weights[nq] * dv * dv;
                            }
                            term += std::max(unorm, 0.0);
                        }
                        acc += dt * term;
                    }
                }
                partial[bi] += acc;
            });
            double delta_l =
                std::sqrt(std::accumulate(partial.begin(), partial.end(), 0.0) /
                          static_cast<double>(n));
            deltas.push_back(delta_l);
            // Adopt the refreshed channels as the next frozen iterate.
            std::copy(sol.z.begin(), sol.z.end(), frozen_z.begin());
            std::copy(sol.q.begin(), sol.q.end(), frozen_q.begin());
            for (int j = j_lo; j < j_hi; ++j)
                prev_fns[static_cast<std::size_t>(j)] = fns[static_cast<std::size_t>(j)];
            if (delta_l < settings.picard_tol) break;
            if (deltas.size() >= 3) {
                double d1 = deltas[deltas.size() - 2], d2 = deltas[deltas.size() - 3];
                if (delta_l >= 0.98 * d1 && d1 >= 0.98 * d2) {
                    std::ostringstream os;
                    os << "contraction stalled in window [" << bundle.grid.node(j_lo) << ","
                       << bundle.grid.node(j_hi) << "]: last deltas " << d1 << ", " << delta_l;
                    throw ContractionStall(os.str());
                }
            }
            if (l == settings.picard_iteration_cap && delta_l >= settings.picard_tol) {
                std::ostringstream os;
                os << "window fixed point did not reach " << settings.picard_tol << " within "
                   << settings.picard_iteration_cap << " iterations (last delta " << delta_l
                   << ")";
                throw ContractionStall(os.str());
            }
        }
        sol.picard_iterations_used.push_back(iters);
        sol.picard_deltas.push_back(std::move(deltas));
        j_hi = j_lo;
    }
    // Windows are marched right to left; reverse to report them left to right.
    std::reverse(sol.picard_iterations_used.begin(), sol.picard_iterations_used.end());
    std::reverse(sol.picard_deltas.begin(), sol.picard_deltas.end());
    fill_fields(ctx, fns, sol);
    return sol;
}

ConvergenceTable truncation_study(const ModelSpec& spec, double t, std::span<const double> x0,
                                  const TimeGrid& grid, const std::vector<int>& ks, int n_paths,
                                  std::uint64_t seed, const RegressionBasis& basis,
                                  QEstimator estimator, const SolverSettings& settings) {
    if (ks.empty()) throw ConfigError("truncation_study requires a non-empty k list");
    for (std::size_t i = 1; i < ks.size(); ++i)
        if (ks[i] <= ks[i - 1]) throw ConfigError("truncation_study requires increasing ks");
    ConvergenceTable table;
    table.ks = ks;
    const int k_max = ks.back();
    auto tm_ref = truncate(*spec.measure, k_max);
    auto bundle_ref = simulate(spec, tm_ref, t, x0, grid, n_paths, seed);
    auto sol_ref = solve_lsmc(spec, bundle_ref, basis, estimator, settings);

    const int m = spec.dims.components_m;
    const int d = spec.dims.brownian_d;
    for (int k : ks) {
        auto tm = truncate(*spec.measure, k);
        auto bundle = simulate(spec, tm, t, x0, grid, n_paths, seed);
        auto sol = solve_lsmc(spec, bundle, basis, estimator, settings);
        double ex = 0.0, ey = 0.0, eu = 0.0, ez = 0.0;
        for (int p = 0; p < n_paths; ++p) {
            double sup_x = 0.0, sup_y = 0.0, int_u = 0.0, int_z = 0.0;
            for (int j = 0; j <= grid.n_steps; ++j) {
                double dx2 = 0.0;
                for (int c = 0; c < spec.dims.state_k; ++c) {
                    double dv = bundle.state(p, j)[static_cast<std::size_t>(c)] -
                                bundle_ref.state(p, j)[static_cast<std::size_t>(c)];
                    dx2 += dv * dv;
                }
                sup_x = std::max(sup_x, dx2);
                double dy2 = 0.0;
                for (int i = 0; i < m; ++i) {
                    double dv = sol.y_at(i, p, j) - sol_ref.y_at(i, p, j);
                    dy2 += dv * dv;
                }
                sup_y = std::max(sup_y, dy2);
            }
            for (int j = 0; j < grid.n_steps; ++j) {
                for (int i = 0; i < m; ++i) {
                    double dq = sol.q_at(i, p, j) - sol_ref.q_at(i, p, j);
                    int_u += grid.dt() * dq * dq;
                    for (int dd = 0; dd < d; ++dd) {
                        double dz = sol.z_at(i, p, j)[dd] - sol_ref.z_at(i, p, j)[dd];
                        int_z += grid.dt() * dz * dz;
                    }
                }
            }
            ex += sup_x;
            ey += sup_y;
            eu += int_u;
            ez += int_z;
        }
        table.e_x.push_back(ex / n_paths);
        table.e_y.push_back(ey / n_paths);
        table.e_u.push_back(eu / n_paths);
        table.e_z.push_back(ez / n_paths);
        table.tail_mass.push_back(small_ball_mass(*spec.measure, 1.0 / k));
    }
    for (std::size_t i = 0; i < table.ks.size(); ++i)
        if (table.tail_mass[i] > 0.0)
            table.fitted_c = std::max(table.fitted_c, table.e_x[i] / table.tail_mass[i]);
    // Spearman rank correlation between e_x and the tail mass.
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> order(v.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < order.size(); ++i) r[order[i]] = static_cast<double>(i);
        return r;
    };
    auto rx = ranks(table.e_x);
    auto rm = ranks(table.tail_mass);
    double mx = 0.0, mm = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        mm += rm[i];
    }
    mx /= static_cast<double>(rx.size());
    mm /= static_cast<double>(rm.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (rm[i] - mm);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (rm[i] - mm) * (rm[i] - mm);
    }
    table.spearman_x = (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 1.0;
    return table;
}

} // namespace levybsde
