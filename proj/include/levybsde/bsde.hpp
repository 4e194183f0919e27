#pragma once

#include "levybsde/field.hpp"
#include "levybsde/model.hpp"
#include "levybsde/sde.hpp"

#include <cstdint>
#include <vector>

namespace levybsde {

/// Conditional-expectation estimator. Polynomial uses monomials up to the
/// given total degree on standardized states; Local (state dim 1) uses
/// cell indicators times affine functions. Basis count is capped at
/// n_paths / 20.
struct RegressionBasis {
    enum class Family { Polynomial, Local };
    Family family = Family::Polynomial;
    int degree = 2; // Polynomial
    int cells = 16; // Local
};

enum class QEstimator { Representation, Martingale };

struct SolverSettings {
    QuadSpec q_quad = coarse_quad(); // jump-channel quadrature, per path per step
    int field_nx = 101;              // u_fields lattice nodes per dimension
    double field_padding = 0.15;     // relative padding of the path quantile box
    int inner_fixpoint_cap = 50;
    double inner_fixpoint_tol = 1e-12;
    int picard_iteration_cap = 30;
    double picard_tol = 1e-6;
    double picard_delta = 0.0; // <= 0: auto, (4 C^2)^-1 from sampled Lipschitz constant
};

struct StepDiagnostics {
    double condition = 1.0;     // worst Gram condition estimate at the step
    double rms_residual = 0.0;  // y-channel regression residual
    bool degenerate = false;    // states collapsed to a point; constant basis
};

/// Discrete-time solution triple. y is pathwise sigma(X_j)-measurable, z the
/// regression estimate of the Brownian channel and q the scalar coupling
/// channel (integral of gamma_i U against lambda, or its L2(lambda) norm in
/// norm-coupling mode). u_fields carries the per-component value-function
/// estimates on a lattice covering the path bulk.
struct BsdeSolution {
    TimeGrid grid;
    int components = 1;
    int n_paths = 0;
    int brownian_dim = 1;
    QEstimator estimator = QEstimator::Representation;

    std::vector<double> y; // [i][path][node]
    std::vector<double> z; // [i][path][step][d]
    std::vector<double> q; // [i][path][step]
    ValueField u_fields;
    std::vector<StepDiagnostics> diagnostics; // per step
    double regression_tolerance = 0.0;        // max y-channel rms residual
    std::vector<int> picard_iterations_used;  // per window (Picard solver only)
    std::vector<std::vector<double>> picard_deltas; // per window iteration deltas

    double y_at(int i, int path, int node) const {
        return y[(static_cast<std::size_t>(i) * n_paths + path) * grid.n_nodes() + node];
    }
    double q_at(int i, int path, int step) const {
        return q[(static_cast<std::size_t>(i) * n_paths + path) * grid.n_steps + step];
    }
    const double* z_at(int i, int path, int step) const {
        return z.data() +
               ((static_cast<std::size_t>(i) * n_paths + path) * grid.n_steps + step) *
                   brownian_dim;
    }
};

/// Backward least-squares Monte Carlo sweep over the bundle grid. Per step:
/// continuation and Brownian-channel regressions, the jump channel per the
/// chosen estimator (Representation evaluates the current regressed field's
/// increments under the full measure; Martingale regresses the compensated
/// jump functional of the truncated measure), then one inner fixed point for
/// the implicitness of the driver in y, jointly across components.
BsdeSolution solve_lsmc(const ModelSpec& spec, const PathBundle& bundle,
                        const RegressionBasis& basis, QEstimator estimator,
                        const SolverSettings& settings = SolverSettings{});

/// Contraction solver: partitions [t,T] into windows of length at most delta
/// (auto: (4 C^2)^-1 with C the sampled driver Lipschitz constant, capped at
/// the horizon), marches windows backward, and within each window iterates
/// the map (z,q) -> solve-with-frozen-channels until the empirical window
/// norm of the channel change drops under picard_tol.
BsdeSolution picard_subinterval(const ModelSpec& spec, const PathBundle& bundle,
                                const RegressionBasis& basis,
                                const SolverSettings& settings = SolverSettings{});

/// Solves the system whose coupling scalar is exogenous, evaluated from
/// u_prev instead of the solution under construction.
BsdeSolution solve_frozen_nonlocal(const ModelSpec& spec, const PathBundle& bundle,
                                   const RegressionBasis& basis, const ValueField& u_prev,
                                   const SolverSettings& settings = SolverSettings{});

struct ConvergenceTable {
    std::vector<int> ks;
    std::vector<double> tail_mass; // integral of (1^|e|^2) below 1/k
    std::vector<double> e_x;       // E[sup_s |X^k - X^kmax|^2]
    std::vector<double> e_y;       // E[sup_s |Y^k - Y^kmax|^2]
    std::vector<double> e_u;       // ds-integrated q-channel difference
    std::vector<double> e_z;       // ds-integrated z-channel difference (reported, not gated)
    double fitted_c = 0.0;         // min C with e_x <= C * tail_mass
    double spearman_x = 0.0;       // rank correlation of e_x against tail mass
};

/// Truncation convergence study under common random numbers: one seed, nested
/// jump streams, per-k solves compared against the finest truncation.
ConvergenceTable truncation_study(const ModelSpec& spec, double t, std::span<const double> x0,
                                  const TimeGrid& grid, const std::vector<int>& ks, int n_paths,
                                  std::uint64_t seed, const RegressionBasis& basis,
                                  QEstimator estimator = QEstimator::Representation,
                                  const SolverSettings& settings = SolverSettings{});

} // namespace levybsde
