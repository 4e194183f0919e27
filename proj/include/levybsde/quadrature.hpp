#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace levybsde {

// Shell structure for radial integrals against singular densities: geometric
// shells of ratio 2^(1/shells_per_octave) marching down from the upper radius,
// a fixed Gauss-Legendre rule on each shell. Everything below `floor_radius`
// is left to the caller (closed-form tail estimate from the declared decay).
struct QuadSpec {
    int gl_points = 16;          // 4, 8 or 16
    int shells_per_octave = 1;
    double floor_radius = 0x1.0p-40;
};

// Coarser rule for per-path / per-node inner loops where regression noise
// dominates the quadrature error.
QuadSpec coarse_quad();

// Integrates f over [lo, hi] with the shell structure of `spec` (shells are
// anchored at hi). lo may equal spec.floor_radius or any positive cut.
double shell_integrate(const std::function<double(double)>& f, double lo, double hi,
                       const QuadSpec& spec);

// Nodes and weights of the same rule, for callers that reuse a fixed rule
// against many integrands (weights contain the shell scaling only).
struct RadialRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
RadialRule shell_rule(double lo, double hi, const QuadSpec& spec);

std::span<const double> gauss_legendre_nodes(int points);
std::span<const double> gauss_legendre_weights(int points);

} // namespace levybsde
