#pragma once

#include "levybsde/bsde.hpp"
#include "levybsde/fd.hpp"

#include <map>
#include <string>
#include <vector>

namespace levybsde {

/// Executable check result: reproducible from its digest (config echo, seeds,
/// dimensions), with gate statistics and per-row artifact tables for export.
struct CheckReport {
    std::string name;
    std::map<std::string, std::string> digest;
    std::map<std::string, double> statistics;
    double threshold = 0.0;
    bool pass = false;

    struct Table {
        std::string name;
        std::vector<std::string> columns;
        std::vector<std::vector<double>> rows;
    };
    std::vector<Table> artifacts;
};

struct ProbeSettings {
    int n_steps = 50;
    int n_paths = 20000;
    int truncation_k = 8;
    RegressionBasis basis;
    QEstimator estimator = QEstimator::Representation;
    SolverSettings solver;
    std::uint64_t seed = 4242;
    bool with_markov_reference = true; // reference run + field comparison
    bool with_fd = false;              // 1D oracle comparison
    int fd_nx = 201;
    int fd_nt = 200;
    double fd_box_half_width = 4.0;
    double markov_tolerance = 3e-2; // regression-bias allowance on the reference field
    double fd_tolerance = 5e-2;
};

/// Feynman-Kac consistency: for each probe (t,x) an independent simulation
/// started there yields Y_t; compared against the value field of a reference
/// run started elsewhere (Markov consistency) and, in 1D, the
/// finite-difference oracle.
CheckReport feynman_kac_probe(const ModelSpec& spec,
                              const std::vector<std::pair<double, std::vector<double>>>& points,
                              const ProbeSettings& settings);

/// Jump representation: mean-square distance (under ds x dP x dlambda_k)
/// between the martingale-regressed per-bin jump channel and the field
/// increment u(s, X_{s-} + beta) - u(s, X_{s-}) from the regressed fields.
/// Requires a Martingale-mode solution on a finite-activity truncation.
CheckReport jump_representation_check(const ModelSpec& spec, const BsdeSolution& solution,
                                      const PathBundle& bundle, double threshold = 1e-2,
                                      int bins_per_branch = 6);

/// Increment-class fit: smallest (C,p) with
/// |u(t,x) - u(t,x')| <= C (1 + |x|^p + |x'|^p) |x - x'| over sampled pairs;
/// passes when C is stable (<20% change) under doubling the pair count.
CheckReport u_class_check(const ValueField& u, const Box& box, int n_pairs,
                          std::uint64_t seed = 777);

/// Moment bound of the jump channel: E[(integral of ||U_s||^2 ds)^(p/2)]
/// reconstructed from the representation evaluator over an |x| ladder, fitted
/// against C (1 + |x|^rho); finiteness at every x is the gate, the fit must be
/// stable under doubling the path count.
CheckReport up_moment_check(const ModelSpec& spec, const std::vector<double>& x_ladder, int p,
                            const ProbeSettings& settings);

/// Uniqueness fixed point: iterates u -> fields(solve_frozen_nonlocal(u))
/// from u0 and gates on the sup-lattice distance between successive iterates
/// and against the direct solve. Throws NoConvergence with the distance trace
/// when max_outer is exhausted.
CheckReport uniqueness_fixed_point(const ModelSpec& spec, const ValueField& u0, int max_outer,
                                   const ProbeSettings& settings);

/// Evaluation of field b on field a's lattice, sup distance.
double sup_distance_on_lattice(const ValueField& a, const ValueField& b);

} // namespace levybsde
