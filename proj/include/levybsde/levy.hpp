#pragma once

#include "levybsde/quadrature.hpp"
#include "levybsde/rng.hpp"

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace levybsde {

/// Declared small-mark decay class of an integrand on E = R^l \ {0}.
/// Linear stands for O(1 ^ |e|) (coupling-type integrands), Quadratic for
/// O(1 ^ |e|^2) (Taylor-remainder and squared integrands).
enum class IntegrandDecay { Linear, Quadratic };

/// A sigma-finite measure on E = R^l \ {0} integrating (1 ^ |e|^2), given by a
/// density against Lebesgue measure. The density may blow up at the origin
/// like |e|^(-l-alpha) with alpha in [0,2); alpha only steers the quadrature
/// subdivision and the below-floor tail estimate, it is never assumed exact.
class LevyMeasure {
public:
    /// General measure on R \ {0} (dim 1); density evaluated on both signs.
    static LevyMeasure scalar(std::function<double(double)> density, double support_radius,
                              double alpha);
    /// Isotropic measure in dimension dim >= 1 with radial density rho(|e|).
    static LevyMeasure isotropic(int dim, std::function<double(double)> radial_density,
                                 double support_radius, double alpha);
    static LevyMeasure zero();

    /// Two-sided exponentially tempered stable density c * exp(-|e|) |e|^(-1-alpha),
    /// dim 1. `cutoff` is the support radius used by the quadrature; the mass
    /// beyond it is reported by validate().
    static LevyMeasure tempered_stable(double c, double alpha, double cutoff = 50.0);
    /// Finite measure: uniform density on the annulus {radius <= |e| <= 2*radius}
    /// (dim 1) with the given total mass.
    static LevyMeasure finite_uniform(double mass, double radius);

    int dim() const { return dim_; }
    double support_radius() const { return support_radius_; }
    double alpha() const { return alpha_; }
    bool is_zero() const { return zero_; }
    bool isotropic_radial() const { return isotropic_; }

    double density(std::span<const double> e) const;
    /// Branch densities at radius r > 0: dim 1 exposes both signs, isotropic
    /// measures expose the radial density integrated over the sphere.
    int branch_count() const { return dim_ == 1 ? 2 : 1; }
    double branch_density(int branch, double r) const;

    /// Radial integrand r -> sum over branches of weight(r) * phi(branch point).
    double radial_integrand(double r, const std::function<double(std::span<const double>)>& phi) const;

private:
    int dim_ = 1;
    bool zero_ = true;
    bool isotropic_ = false;
    std::function<double(std::span<const double>)> density_;
    std::function<double(double)> radial_;
    double support_radius_ = 1.0;
    double alpha_ = 0.0;
};

struct ValidationReport {
    std::vector<double> level_values; // quadrature of (1 ^ |e|^2) per refinement level
    double value = 0.0;               // finest level
    bool pass = false;                // successive levels agree to 1e-6 relative
    double mass_beyond_support = 0.0; // estimated measure of {|e| > support_radius}
};

/// Checks integrability of (1 ^ |e|^2); throws DivergentIntegral when the
/// level values keep growing instead of stabilising.
ValidationReport validate(const LevyMeasure& measure, int refinement_levels);

/// Fixed quadrature rule against a measure: weights already contain the
/// density, shell widths and (for dim 1) both sign branches.
struct MarkRule {
    int dim = 1;
    std::vector<double> marks;   // [count][dim] flattened
    std::vector<double> weights; // [count]
    std::size_t count() const { return weights.size(); }
    std::span<const double> mark(std::size_t i) const {
        return {marks.data() + static_cast<std::size_t>(dim) * i, static_cast<std::size_t>(dim)};
    }
};

class TruncatedMeasure {
public:
    TruncatedMeasure() = default;

    const LevyMeasure& base() const { return base_; }
    int k() const { return k_; }
    double threshold() const { return k_ > 0 ? 1.0 / k_ : 0.0; }
    double total_mass() const { return total_mass_; }

    /// Quadrature of phi against the restriction of the base measure to
    /// {|e| >= 1/k}. No singularity is left after truncation.
    double integrate(const std::function<double(std::span<const double>)>& phi,
                     const QuadSpec& spec = QuadSpec{}) const;

    MarkRule mark_rule(const QuadSpec& spec = QuadSpec{}) const;

    struct Annulus {
        double lo = 0.0, hi = 0.0;
        double mass = 0.0;
        // Per branch: normalized radial CDF on log-spaced nodes.
        struct Branch {
            double mass = 0.0;
            std::vector<double> nodes;
            std::vector<double> cdf;
        };
        std::vector<Branch> branches;
    };
    const std::vector<Annulus>& annuli() const { return annuli_; }

private:
    friend TruncatedMeasure truncate(const LevyMeasure&, int);
    LevyMeasure base_;
    int k_ = 1;
    double total_mass_ = 0.0;
    std::vector<Annulus> annuli_;
};

/// Restriction of the measure to {|e| >= 1/k}; builds the sampling tables.
/// Annuli are dyadic from the support radius downward, so jump streams drawn
/// from truncations at different k of the same measure are nested path by
/// path under a common seed.
TruncatedMeasure truncate(const LevyMeasure& measure, int k);

/// Jump events of a compound Poisson process with intensity measure lambda_k
/// on [t0, t1), sorted by time. Deterministic given the stream.
struct JumpList {
    int dim = 1;
    std::vector<double> times;
    std::vector<double> marks; // [count][dim] flattened
    std::size_t count() const { return times.size(); }
    std::span<const double> mark(std::size_t i) const {
        return {marks.data() + static_cast<std::size_t>(dim) * i, static_cast<std::size_t>(dim)};
    }
};

JumpList sample_jumps(const TruncatedMeasure& tm, double t0, double t1, RngStream& rng);

/// Quadrature of phi against the full measure. The innermost shell below the
/// quadrature floor is closed with the declared decay order; a sampled ratio
/// test near the origin raises SlowDecay when phi visibly violates it.
double integrate(const LevyMeasure& measure,
                 const std::function<double(std::span<const double>)>& phi, IntegrandDecay decay,
                 const QuadSpec& spec = QuadSpec{});

/// Tail mass m(thr) = integral of (1 ^ |e|^2) over {|e| < thr}.
double small_ball_mass(const LevyMeasure& measure, double threshold,
                       const QuadSpec& spec = QuadSpec{});

/// Registry used by the experiment config: tempered_stable{c,alpha,cutoff},
/// finite_uniform{mass,radius}, zero{}.
LevyMeasure make_measure(const std::string& name, const std::map<std::string, double>& params);
std::vector<std::string> measure_names();
std::string describe_measure(const std::string& name);

} // namespace levybsde
