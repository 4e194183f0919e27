#pragma once

#include "levybsde/field.hpp"
#include "levybsde/model.hpp"

#include <span>

namespace levybsde {

/// Coupling operator: integral of gamma_i(t,x,e) [u^i(t, x+beta(t,x,e)) - u^i(t,x)]
/// against the measure. The integrand carries one (1^|e|) factor from gamma
/// and one from the field increment, so it is integrated in the quadratic
/// decay class; SlowDecay surfaces fields without the local increment bound.
double eval_B(const ValueField& u, int i, const ModelSpec& spec, double t,
              std::span<const double> x, const QuadSpec& quad = QuadSpec{});

/// Norm variant: L2(lambda) norm of the field increment e -> u^i(t,x+beta)-u^i(t,x).
double eval_B_norm(const ValueField& u, int i, const ModelSpec& spec, double t,
                   std::span<const double> x, const QuadSpec& quad = QuadSpec{});

/// Taylor-compensated operator: integral of
///   u^i(t,x+beta) - u^i(t,x) - beta^T D_x u^i(t,x)
/// with D_x by central differences on the lattice. Marks whose jump size
/// falls under the lattice resolution are evaluated through the second-order
/// form (1/2) beta^T H beta with a finite-difference Hessian; the cut radius
/// adapts to the Hessian norm within the resolvable band.
double eval_K(const ValueField& u, const ModelSpec& spec, double t, std::span<const double> x,
              int i, const QuadSpec& quad = QuadSpec{});

/// Small-jump cut radius used by eval_K for a lattice spacing min_dx; exposed
/// for the finite-difference solver's CFL accounting.
double taylor_cut_radius(const ModelSpec& spec, double t, std::span<const double> x,
                         double min_dx);

/// Sampled envelope constant sup |beta(t,x,e)| / (1 ^ |e|): the largest jump
/// size the state can take from x.
double jump_size_envelope(const ModelSpec& spec, double t, std::span<const double> x);

/// Mass of the measure above a radius (finite for every positive cut).
double measure_mass_above(const LevyMeasure& measure, double radius,
                          const QuadSpec& quad = QuadSpec{});

} // namespace levybsde
