#include "levybsde/levy.hpp"

#include "levybsde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace levybsde {

namespace {

constexpr int kAngularPoints = 32; // dim-2 angular rule

double min1(double r) { return r < 1.0 ? r : 1.0; }

} // namespace

LevyMeasure LevyMeasure::scalar(std::function<double(double)> density, double support_radius,
                                double alpha) {
    if (!(support_radius > 0.0)) throw QuadratureFailure("support_radius must be positive");
    if (!(alpha >= 0.0 && alpha < 2.0))
        throw QuadratureFailure("singularity exponent must lie in [0,2)");
    LevyMeasure m;
    m.dim_ = 1;
    m.zero_ = false;
    m.isotropic_ = false;
    auto f = std::move(density);
    m.density_ = [f](std::span<const double> e) { return f(e[0]); };
    m.support_radius_ = support_radius;
    m.alpha_ = alpha;
    return m;
}

LevyMeasure LevyMeasure::isotropic(int dim, std::function<double(double)> radial_density,
                                   double support_radius, double alpha) {
    if (dim < 1) throw QuadratureFailure("mark dimension must be >= 1");
    if (!(support_radius > 0.0)) throw QuadratureFailure("support_radius must be positive");
    if (!(alpha >= 0.0 && alpha < 2.0))
        throw QuadratureFailure("singularity exponent must lie in [0,2)");
    LevyMeasure m;
    m.dim_ = dim;
    m.zero_ = false;
    m.isotropic_ = true;
    m.radial_ = std::move(radial_density);
    auto rad = m.radial_;
    m.density_ = [rad](std::span<const double> e) {
        double r2 = 0.0;
        for (double x : e) r2 += x * x;
        return rad(std::sqrt(r2));
    };
    m.support_radius_ = support_radius;
    m.alpha_ = alpha;
    return m;
}

LevyMeasure LevyMeasure::zero() {
    LevyMeasure m;
    m.dim_ = 1;
    m.zero_ = true;
    m.isotropic_ = false;
    m.density_ = [](std::span<const double>) { return 0.0; };
    m.support_radius_ = 1.0;
    m.alpha_ = 0.0;
    return m;
}

LevyMeasure LevyMeasure::tempered_stable(double c, double alpha, double cutoff) {
    if (!(c >= 0.0)) throw QuadratureFailure("tempered_stable: c must be >= 0");
    return scalar(
        [c, alpha](double e) {
            double r = std::abs(e);
            return c * std::exp(-r) * std::pow(r, -1.0 - alpha);
        },
        cutoff, alpha);
}

LevyMeasure LevyMeasure::finite_uniform(double mass, double radius) {
    if (!(mass >= 0.0) || !(radius > 0.0))
        throw QuadratureFailure("finite_uniform: mass >= 0 and radius > 0 required");
    double dens = mass / (2.0 * radius); // two branches of length radius each
    auto m = scalar(
        [dens, radius](double e) {
            double r = std::abs(e);
            return (r >= radius && r <= 2.0 * radius) ? dens : 0.0;
        },
        2.0 * radius, 0.0);
    return m;
}

double LevyMeasure::density(std::span<const double> e) const {
    if (zero_) return 0.0;
    return density_(e);
}

double LevyMeasure::branch_density(int branch, double r) const {
    if (zero_) return 0.0;
    if (dim_ == 1) {
        double e = branch == 0 ? r : -r;
        return density_(std::span<const double>(&e, 1));
    }
    // Isotropic: surface-integrated radial weight.
    double surf;
    if (dim_ == 2) {
        surf = 2.0 * std::numbers::pi * r;
    } else if (dim_ == 3) {
        surf = 4.0 * std::numbers::pi * r * r;
    } else {
        surf = std::pow(r, dim_ - 1) * dim_ * std::pow(std::numbers::pi, dim_ / 2.0) /
               std::tgamma(dim_ / 2.0 + 1.0);
    }
    return surf * radial_(r);
}

double LevyMeasure::radial_integrand(double r,
                                     const std::function<double(std::span<const double>)>& phi) const {
    if (zero_) return 0.0;
    if (dim_ == 1) {
        double ep = r, en = -r;
        return phi(std::span<const double>(&ep, 1)) * branch_density(0, r) +
               phi(std::span<const double>(&en, 1)) * branch_density(1, r);
    }
    if (dim_ == 2) {
        double acc = 0.0;
        for (int a = 0; a < kAngularPoints; ++a) {
            double th = (2.0 * std::numbers::pi) * (a + 0.5) / kAngularPoints;
            double e[2] = {r * std::cos(th), r * std::sin(th)};
            acc += phi(std::span<const double>(e, 2));
        }
        return (acc / kAngularPoints) * branch_density(0, r);
    }
    throw QuadratureFailure("quadrature against general integrands requires mark dimension <= 2");
}

namespace {

// Sampled decay-ratio test: flags integrands whose magnitude near the origin
// grows against the declared (1 ^ |e|)^j envelope.
void check_decay(const LevyMeasure& m, const std::function<double(std::span<const double>)>& phi,
                 int j, double floor_radius) {
    double top = std::min(1.0, m.support_radius());
    if (!(floor_radius > 0.0) || floor_radius >= top) return;
    std::vector<double> radii;
    for (double r = top; r >= floor_radius * 0.999; r /= 16.0) radii.push_back(r);
    if (radii.size() < 3) return;
    std::vector<double> q(radii.size(), 0.0);
    for (std::size_t s = 0; s < radii.size(); ++s) {
        double r = radii[s];
        double w = std::pow(min1(r), j);
        if (m.dim() == 1) {
            double ep = r, en = -r;
            q[s] = std::max(std::abs(phi(std::span<const double>(&ep, 1))),
                            std::abs(phi(std::span<const double>(&en, 1)))) /
                   w;
        } else {
            double acc = 0.0;
            for (int a = 0; a < 4; ++a) {
                std::vector<double> e(static_cast<std::size_t>(m.dim()), 0.0);
                double th = 2.0 * std::numbers::pi * (a + 0.25) / 4.0;
                e[0] = r * std::cos(th);
                e[std::min<std::size_t>(1, e.size() - 1)] = r * std::sin(th);
                acc = std::max(acc, std::abs(phi(e)));
            }
            q[s] = acc / w;
        }
    }
    // Growth factors between consecutive probe radii (coarse at top, fine at
    // the bottom of the ladder). Two successive factors >= 8 at the smallest
    // scales indicate decay at least 0.75 orders slower than declared.
    int violations = 0;
    for (std::size_t s = radii.size(); s-- > 1;) {
        double qa = q[s - 1]; // larger radius
        double qb = q[s];     // 16x smaller radius
        if (qa > 0.0 && qb / qa >= 8.0) {
            ++violations;
            if (violations >= 2) {
                std::ostringstream os;
                os << "integrand violates declared (1^|e|)^" << j
                   << " decay near the origin (ratio " << qb / qa << " per 16x radius shrink at r="
                   << radii[s] << ")";
                throw SlowDecay(os.str());
            }
        } else if (qb > 0.0) {
            violations = 0;
        }
    }
}

} // namespace

double integrate(const LevyMeasure& measure,
                 const std::function<double(std::span<const double>)>& phi, IntegrandDecay decay,
                 const QuadSpec& spec) {
    if (measure.is_zero()) return 0.0;
    const int j = decay == IntegrandDecay::Linear ? 1 : 2;
    if (static_cast<double>(j) <= measure.alpha())
        throw SlowDecay("declared integrand decay does not integrate a singularity of order alpha=" +
                        std::to_string(measure.alpha()));
    check_decay(measure, phi, j, spec.floor_radius);
    const double floor_r = std::min(spec.floor_radius, measure.support_radius());
    double outer = shell_integrate([&](double r) { return measure.radial_integrand(r, phi); },
                                   floor_r, measure.support_radius(), spec);
    // Below-floor closure: integrand ~ c r^j with the density frozen at the
    // declared singularity order gives f * integrand(f) / (j - alpha).
    double tail = floor_r * measure.radial_integrand(floor_r, phi) /
                  (static_cast<double>(j) - measure.alpha());
    double total = outer + tail;
    if (!std::isfinite(total)) throw QuadratureFailure("non-finite quadrature value");
    return total;
}

double small_ball_mass(const LevyMeasure& measure, double threshold, const QuadSpec& spec) {
    if (measure.is_zero()) return 0.0;
    auto one_wedge = [](std::span<const double> e) {
        double r2 = 0.0;
        for (double x : e) r2 += x * x;
        return std::min(1.0, r2);
    };
    if (threshold <= spec.floor_radius) return 0.0;
    double thr = std::min(threshold, measure.support_radius());
    double outer = shell_integrate([&](double r) { return measure.radial_integrand(r, one_wedge); },
                                   spec.floor_radius, thr, spec);
    double tail = spec.floor_radius * measure.radial_integrand(spec.floor_radius, one_wedge) /
                  (2.0 - measure.alpha());
    return outer + tail;
}

ValidationReport validate(const LevyMeasure& measure, int refinement_levels) {
    ValidationReport report;
    if (refinement_levels < 1) refinement_levels = 1;
    auto one_wedge = [](std::span<const double> e) {
        double r2 = 0.0;
        for (double x : e) r2 += x * x;
        return std::min(1.0, r2);
    };
    if (measure.is_zero()) {
        report.level_values.assign(static_cast<std::size_t>(refinement_levels), 0.0);
        report.pass = true;
        return report;
    }
    for (int level = 1; level <= refinement_levels; ++level) {
        QuadSpec spec;
        spec.gl_points = 16;
        spec.shells_per_octave = 1;
        spec.floor_radius = std::ldexp(1.0, -8 * (level + 1)); // 2^-16, 2^-24, ...
        double v = shell_integrate([&](double r) { return measure.radial_integrand(r, one_wedge); },
                                   std::min(spec.floor_radius, measure.support_radius()),
                                   measure.support_radius(), spec);
        report.level_values.push_back(v);
    }
    report.value = report.level_values.back();
    const std::size_t L = report.level_values.size();
    if (L >= 3) {
        double d1 = report.level_values[L - 2] - report.level_values[L - 3];
        double d2 = report.level_values[L - 1] - report.level_values[L - 2];
        double scale = std::max(1.0, std::abs(report.value));
        if (d2 > 1e-3 * scale && d2 > 1.5 * std::max(d1, 0.0)) {
            std::ostringstream os;
            os << "integral of (1^|e|^2) keeps growing under refinement (last increments " << d1
               << ", " << d2 << "); density too singular";
            throw DivergentIntegral(os.str());
        }
    }
    if (L >= 2) {
        double diff = std::abs(report.level_values[L - 1] - report.level_values[L - 2]);
        report.pass = diff <= 1e-6 * std::max(1.0, std::abs(report.value));
    } else {
        report.pass = std::isfinite(report.value);
    }
    // Mass beyond the declared support radius, probed over four extra octaves.
    double R = measure.support_radius();
    QuadSpec beyond;
    beyond.gl_points = 16;
    report.mass_beyond_support = shell_integrate(
        [&](double r) { return measure.radial_integrand(r, one_wedge); }, R, 16.0 * R, beyond);
    return report;
}

TruncatedMeasure truncate(const LevyMeasure& measure, int k) {
    if (k < 1) throw QuadratureFailure("truncation level k must be >= 1");
    TruncatedMeasure tm;
    tm.base_ = measure;
    tm.k_ = k;
    if (measure.is_zero()) {
        tm.total_mass_ = 0.0;
        return tm;
    }
    const double R = measure.support_radius();
    const double thr = 1.0 / k;
    if (thr >= R) {
        tm.total_mass_ = 0.0;
        return tm;
    }
    QuadSpec spec; // default fine rule
    tm.total_mass_ =
        shell_integrate([&](double r) { return measure.radial_integrand(r, [](std::span<const double>) {
                            return 1.0;
                        }); },
                        thr, R, spec);
    if (!std::isfinite(tm.total_mass_))
        throw QuadratureFailure("truncated measure has non-finite mass");

    // Dyadic annuli from R down to (and containing) the threshold; tables are
    // identical across truncation levels of the same base measure.
    const int n_branches = measure.branch_count();
    const int table_intervals = 128;
    double hi = R;
    while (hi > thr) {
        double lo = hi * 0.5;
        TruncatedMeasure::Annulus ann;
        ann.lo = lo;
        ann.hi = hi;
        ann.branches.resize(static_cast<std::size_t>(n_branches));
        double mass_total = 0.0;
        for (int b = 0; b < n_branches; ++b) {
            auto& br = ann.branches[static_cast<std::size_t>(b)];
            br.nodes.resize(table_intervals + 1);
            br.cdf.resize(table_intervals + 1);
            double log_lo = std::log(lo), log_hi = std::log(hi);
            for (int i = 0; i <= table_intervals; ++i) {
                br.nodes[static_cast<std::size_t>(i)] =
                    std::exp(log_lo + (log_hi - log_lo) * i / table_intervals);
            }
            br.nodes.front() = lo;
            br.nodes.back() = hi;
            br.cdf[0] = 0.0;
            auto gl_nodes = gauss_legendre_nodes(8);
            auto gl_weights = gauss_legendre_weights(8);
            for (int i = 0; i < table_intervals; ++i) {
                double a = br.nodes[static_cast<std::size_t>(i)];
                double c = br.nodes[static_cast<std::size_t>(i) + 1];
                double mid = 0.5 * (a + c), hw = 0.5 * (c - a);
                double seg = 0.0;
                for (std::size_t gq = 0; gq < gl_nodes.size(); ++gq) {
                    seg += gl_weights[gq] * (measure.branch_density(b, mid - hw * gl_nodes[gq]) +
                                             measure.branch_density(b, mid + hw * gl_nodes[gq]));
                }
                br.cdf[static_cast<std::size_t>(i) + 1] =
                    br.cdf[static_cast<std::size_t>(i)] + seg * hw;
            }
            br.mass = br.cdf.back();
            mass_total += br.mass;
            if (br.mass > 0.0) {
                for (auto& c : br.cdf) c /= br.mass;
                br.cdf.back() = 1.0;
            }
        }
        ann.mass = mass_total;
        tm.annuli_.push_back(std::move(ann));
        hi = lo;
    }
    return tm;
}

double TruncatedMeasure::integrate(const std::function<double(std::span<const double>)>& phi,
                                   const QuadSpec& spec) const {
    if (base_.is_zero() || total_mass_ == 0.0) {
        // A truncation below the support infimum still integrates over the
        // full support.
        if (base_.is_zero()) return 0.0;
    }
    double lo = std::min(threshold(), base_.support_radius());
    return shell_integrate([&](double r) { return base_.radial_integrand(r, phi); }, lo,
                           base_.support_radius(), spec);
}

MarkRule TruncatedMeasure::mark_rule(const QuadSpec& spec) const {
    MarkRule rule;
    rule.dim = base_.dim();
    if (base_.is_zero()) return rule;
    if (base_.dim() != 1)
        throw QuadratureFailure("mark_rule currently supports mark dimension 1");
    double lo = std::min(threshold(), base_.support_radius());
    RadialRule radial = shell_rule(lo, base_.support_radius(), spec);
    for (std::size_t i = 0; i < radial.nodes.size(); ++i) {
        double r = radial.nodes[i], w = radial.weights[i];
        for (int b = 0; b < 2; ++b) {
            double dens = base_.branch_density(b, r);
            if (dens <= 0.0) continue;
            rule.marks.push_back(b == 0 ? r : -r);
            rule.weights.push_back(w * dens);
        }
    }
    return rule;
}

JumpList sample_jumps(const TruncatedMeasure& tm, double t0, double t1, RngStream& rng) {
    if (!(t0 < t1)) throw QuadratureFailure("sample_jumps requires t0 < t1");
    if (!std::isfinite(tm.total_mass()))
        throw InfiniteMass("cannot sample jumps: truncated mass is not finite");
    JumpList out;
    out.dim = tm.base().dim();
    const double thr = tm.threshold();
    const double horizon = t1 - t0;
    std::vector<std::size_t> order;
    for (std::size_t ai = 0; ai < tm.annuli().size(); ++ai) {
        const auto& ann = tm.annuli()[ai];
        if (ann.mass <= 0.0) continue;
        RngStream stream = rng.split(ai);
        std::int64_t n = stream.poisson(ann.mass * horizon);
        for (std::int64_t ev = 0; ev < n; ++ev) {
            double time = t0 + horizon * stream.uniform();
            // Branch choice, then radius by inverse CDF on the tabulated grid.
            int branch = 0;
            double u = stream.uniform() * ann.mass;
            double acc = 0.0;
            for (std::size_t b = 0; b < ann.branches.size(); ++b) {
                acc += ann.branches[b].mass;
                if (u <= acc || b + 1 == ann.branches.size()) {
                    branch = static_cast<int>(b);
                    break;
                }
            }
            const auto& br = ann.branches[static_cast<std::size_t>(branch)];
            double v = stream.uniform();
            auto it = std::lower_bound(br.cdf.begin(), br.cdf.end(), v);
            std::size_t idx = it == br.cdf.begin()
                                  ? 1
                                  : static_cast<std::size_t>(std::distance(br.cdf.begin(), it));
            if (idx >= br.cdf.size()) idx = br.cdf.size() - 1;
            double c0 = br.cdf[idx - 1], c1 = br.cdf[idx];
            double frac = c1 > c0 ? (v - c0) / (c1 - c0) : 0.5;
            double r = br.nodes[idx - 1] + frac * (br.nodes[idx] - br.nodes[idx - 1]);
            std::vector<double> mark(static_cast<std::size_t>(out.dim), 0.0);
            if (out.dim == 1) {
                mark[0] = branch == 0 ? r : -r;
            } else {
                // Uniform direction from normalized Gaussians.
                double norm2 = 0.0;
                for (auto& c : mark) {
                    c = stream.normal();
                    norm2 += c * c;
                }
                double norm = std::sqrt(norm2);
                if (norm == 0.0) {
                    mark.assign(mark.size(), 0.0);
                    mark[0] = 1.0;
                    norm = 1.0;
                }
                for (auto& c : mark) c *= r / norm;
            }
            // Thinning: the deepest annulus straddles the threshold.
            double rr = 0.0;
            for (double c : mark) rr += c * c;
            if (std::sqrt(rr) < thr) continue;
            out.times.push_back(time);
            out.marks.insert(out.marks.end(), mark.begin(), mark.end());
        }
    }
    // Sort events by time keeping a deterministic tie order.
    order.resize(out.times.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out.times[a] < out.times[b]; });
    JumpList sorted;
    sorted.dim = out.dim;
    sorted.times.reserve(out.times.size());
    sorted.marks.reserve(out.marks.size());
    for (std::size_t i : order) {
        sorted.times.push_back(out.times[i]);
        auto m = out.mark(i);
        sorted.marks.insert(sorted.marks.end(), m.begin(), m.end());
    }
    return sorted;
}

LevyMeasure make_measure(const std::string& name, const std::map<std::string, double>& params) {
    auto get = [&](const std::string& key, double fallback, bool required = false) {
        auto it = params.find(key);
        if (it == params.end()) {
            if (required) throw ConfigError("measure '" + name + "' requires parameter '" + key + "'");
            return fallback;
        }
        return it->second;
    };
    auto reject_unknown = [&](std::initializer_list<const char*> allowed) {
        for (const auto& [key, value] : params) {
            (void)value;
            bool ok = false;
            for (const char* a : allowed)
                if (key == a) ok = true;
            if (!ok) throw ConfigError("unknown parameter '" + key + "' for measure '" + name + "'");
        }
    };
    if (name == "tempered_stable") {
        reject_unknown({"c", "alpha", "cutoff"});
        return LevyMeasure::tempered_stable(get("c", 1.0), get("alpha", 0.5), get("cutoff", 50.0));
    }
    if (name == "finite_uniform") {
        reject_unknown({"mass", "radius"});
        return LevyMeasure::finite_uniform(get("mass", 1.0), get("radius", 1.0));
    }
    if (name == "zero") {
        reject_unknown({});
        return LevyMeasure::zero();
    }
    throw UnknownName("unknown measure '" + name + "'");
}

std::vector<std::string> measure_names() { return {"tempered_stable", "finite_uniform", "zero"}; }

std::string describe_measure(const std::string& name) {
    if (name == "tempered_stable") {
        return "tempered_stable{c, alpha, cutoff}: two-sided density c*exp(-|e|)*|e|^(-1-alpha) on "
               "R\\{0}. Infinite activity for alpha in [0,2); mass 2*c*Gamma-type tails, cutoff is "
               "the quadrature support radius (default 50, truncated mass reported by validate).";
    }
    if (name == "finite_uniform") {
        return "finite_uniform{mass, radius}: uniform density on the annulus radius<=|e|<=2*radius "
               "with the given total mass. Finite activity; truncations at 1/k below `radius` are "
               "inert.";
    }
    if (name == "zero") {
        return "zero{}: the null measure; mass 0, no jumps, all nonlocal terms vanish.";
    }
    throw UnknownName("unknown measure '" + name + "'");
}

} // namespace levybsde
