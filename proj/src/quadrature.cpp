#include "levybsde/quadrature.hpp"

#include "levybsde/errors.hpp"

#include <algorithm>
#include <array>

namespace levybsde {

namespace {

const std::array<double, 2> kNodes4 = {0.3399810435848562648027, 0.8611363115940525752239};
const std::array<double, 2> kWeights4 = {0.6521451548625461426269, 0.3478548451374538573731};

const std::array<double, 4> kNodes8 = {0.1834346424956498049395, 0.5255324099163289858177,
                                       0.7966664774136267395916, 0.9602898564975362316836};
const std::array<double, 4> kWeights8 = {0.3626837833783619829652, 0.3137066458778872873380,
                                         0.2223810344533744705444, 0.1012285362903762591525};

const std::array<double, 8> kNodes16 = {
    0.0950125098376374401853, 0.2816035507792589132305, 0.4580167776572273863424,
    0.6178762444026437484467, 0.7554044083550030338951, 0.8656312023878317438805,
    0.9445750230732325760780, 0.9894009349916499325962};
const std::array<double, 8> kWeights16 = {
    0.1894506104550684962854, 0.1826034150449235888667, 0.1691565193950025381893,
    0.1495959888165767320815, 0.1246289712555338720525, 0.0951585116824927848099,
    0.0622535239386478928628, 0.0271524594117540948518};

} // namespace

std::span<const double> gauss_legendre_nodes(int points) {
    switch (points) {
        case 4: return kNodes4;
        case 8: return kNodes8;
        case 16: return kNodes16;
        default: throw QuadratureFailure("unsupported Gauss-Legendre order");
    }
}

std::span<const double> gauss_legendre_weights(int points) {
    switch (points) {
        case 4: return kWeights4;
        case 8: return kWeights8;
        case 16: return kWeights16;
        default: throw QuadratureFailure("unsupported Gauss-Legendre order");
    }
}

QuadSpec coarse_quad() {
    QuadSpec q;
    q.gl_points = 4;
    q.shells_per_octave = 1;
    // Shallow floor: per-path rules close the below-floor tail with the
    // decay-order estimate, so the quadratic-decay residual stays ~1e-6
    // relative while the node count roughly halves.
    q.floor_radius = 0x1.0p-12;
    return q;
}

namespace {

// Shells march geometrically downward from `hi`; a boundary is pinned at r=1
// where the (1 ^ |e|) envelopes of this domain kink.
template <typename Emit>
void walk_shells(double lo, double hi, const QuadSpec& spec, Emit&& emit) {
    if (!(hi > lo) || !(hi > 0.0)) return;
    lo = std::max(lo, 0.0);
    const double ratio = std::pow(0.5, 1.0 / spec.shells_per_octave);
    auto run = [&](double a, double b) { // [a, b], shells anchored at b
        double top = b;
        while (top > a) {
            double bottom = std::max(a, top * ratio);
            if (top - bottom <= 0.0) break;
            emit(bottom, top);
            top = bottom;
        }
    };
    if (lo < 1.0 && hi > 1.0) {
        run(1.0, hi);
        run(lo, 1.0);
    } else {
        run(lo, hi);
    }
}

} // namespace

RadialRule shell_rule(double lo, double hi, const QuadSpec& spec) {
    RadialRule rule;
    auto half_nodes = gauss_legendre_nodes(spec.gl_points);
    auto half_weights = gauss_legendre_weights(spec.gl_points);
    walk_shells(lo, hi, spec, [&](double bottom, double top) {
        double mid = 0.5 * (top + bottom);
        double halfwidth = 0.5 * (top - bottom);
        for (std::size_t i = 0; i < half_nodes.size(); ++i) {
            rule.nodes.push_back(mid - halfwidth * half_nodes[i]);
            rule.weights.push_back(halfwidth * half_weights[i]);
            rule.nodes.push_back(mid + halfwidth * half_nodes[i]);
            rule.weights.push_back(halfwidth * half_weights[i]);
        }
    });
    return rule;
}

double shell_integrate(const std::function<double(double)>& f, double lo, double hi,
                       const QuadSpec& spec) {
    auto half_nodes = gauss_legendre_nodes(spec.gl_points);
    auto half_weights = gauss_legendre_weights(spec.gl_points);
    double total = 0.0;
    walk_shells(lo, hi, spec, [&](double bottom, double top) {
        double mid = 0.5 * (top + bottom);
        double halfwidth = 0.5 * (top - bottom);
        double shell = 0.0;
        for (std::size_t i = 0; i < half_nodes.size(); ++i) {
            shell += half_weights[i] *
                     (f(mid - halfwidth * half_nodes[i]) + f(mid + halfwidth * half_nodes[i]));
        }
        total += shell * halfwidth;
    });
    return total;
}

} // namespace levybsde
