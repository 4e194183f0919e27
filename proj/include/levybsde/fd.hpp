#pragma once

#include "levybsde/field.hpp"
#include "levybsde/model.hpp"
#include "levybsde/nonlocal.hpp"

#include <span>

namespace levybsde {

/// Desk-scale 1D problem (state, Brownian and mark dimensions 1, at most two
/// components) marched backward with an IMEX splitting: the local transport
/// and diffusion are implicit (tridiagonal), the nonlocal operators and the
/// driver explicit at the previous slice. Far-field values come from the
/// growth-envelope clamp of the running slice.
struct FdProblem {
    ModelSpec spec;
    double box_half_width = 4.0;
    int nx = 401;
    int nt = 400;
    QuadSpec nonlocal_quad = QuadSpec{};
};

ValueField solve_fd(const FdProblem& problem);

/// Which definition the nonlocal coupling term follows in the residual. On
/// lattice fields the candidate solution is its own (only) test function, so
/// both produce the same number; the flag records which reading was asked.
enum class ResidualDefinition { OwnField, TestFunction };

/// Pointwise residual of the equation at an interior lattice point, with all
/// derivatives by central differences at the lattice scale.
double residual(const ValueField& u, const ModelSpec& spec, double t, std::span<const double> x,
                int i, ResidualDefinition def = ResidualDefinition::OwnField);

} // namespace levybsde
