#include "levybsde/model.hpp"

#include "levybsde/errors.hpp"
#include "levybsde/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace levybsde {

void ModelSpec::check_consistent() const {
    const auto m = static_cast<std::size_t>(dims.components_m);
    if (terminal.size() != m || driver.size() != m || jump_weight.size() != m)
        throw ConfigError("model: terminal/driver/jump_weight must have one entry per component");
    if (!measure) throw ConfigError("model: measure missing");
    if (measure->dim() != dims.mark_l) throw ConfigError("model: measure dimension mismatch");
    if (!driver_uses_q.empty() && driver_uses_q.size() != m)
        throw ConfigError("model: driver_uses_q size mismatch");
}

Generator compose_generator(const ModelSpec& spec, int i, const QuadSpec& quad) {
    spec.check_consistent();
    if (i < 0 || i >= spec.dims.components_m)
        throw ConfigError("compose_generator: component index out of range");
    auto measure = spec.measure;
    auto gamma = spec.jump_weight[static_cast<std::size_t>(i)];
    auto h = spec.driver[static_cast<std::size_t>(i)];
    if (spec.coupling == CouplingMode::GammaIntegral) {
        return [measure, gamma, h, quad](double t, std::span<const double> x,
                                         std::span<const double> y, std::span<const double> z,
                                         const MarkKernel& zeta) {
            double q = 0.0;
            if (!measure->is_zero() && zeta.fn) {
                // gamma contributes one (1 ^ |e|) factor and zeta at least one
                // more, so the product is integrated as a quadratic-decay
                // integrand.
                auto integrand = [&](std::span<const double> e) {
                    return gamma(t, x, e) * zeta.fn(e);
                };
                q = integrate(*measure, integrand, IntegrandDecay::Quadratic, quad);
            }
            return h(t, x, y, z, q);
        };
    }
    return [measure, h, quad](double t, std::span<const double> x, std::span<const double> y,
                              std::span<const double> z, const MarkKernel& zeta) {
        double q = 0.0;
        if (!measure->is_zero() && zeta.fn) {
            auto integrand = [&](std::span<const double> e) {
                double v = zeta.fn(e);
                return v * v;
            };
            q = std::sqrt(std::max(0.0, integrate(*measure, integrand, IntegrandDecay::Quadratic, quad)));
        }
        return h(t, x, y, z, q);
    };
}

double estimate_lipschitz(const std::function<double(std::span<const double>)>& fn, const Box& domain,
                          std::span<const int> active_coords, int samples, std::uint64_t seed,
                          std::vector<double>* witness) {
    const std::size_t dim = domain.dim();
    if (dim == 0 || active_coords.empty() || samples < 2) return 0.0;
    RngStream rng(seed);
    std::vector<double> a(dim), b(dim);
    double best = 0.0;
    double diam = 0.0;
    for (std::size_t d = 0; d < dim; ++d) diam = std::max(diam, domain.hi[d] - domain.lo[d]);
    for (int s = 0; s < samples; ++s) {
        for (std::size_t d = 0; d < dim; ++d) a[d] = rng.uniform(domain.lo[d], domain.hi[d]);
        b = a;
        // Log-uniform pair distance probes short-range slopes too.
        double scale = diam * std::exp(rng.uniform() * std::log(1e-4));
        double norm2 = 0.0;
        for (int c : active_coords) {
            double dir = rng.normal();
            b[static_cast<std::size_t>(c)] += dir * scale;
            norm2 += dir * dir * scale * scale;
        }
        for (int c : active_coords) {
            auto d = static_cast<std::size_t>(c);
            b[d] = std::clamp(b[d], domain.lo[d], domain.hi[d]);
        }
        double dist = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dist += (a[d] - b[d]) * (a[d] - b[d]);
        dist = std::sqrt(dist);
        (void)norm2;
        if (dist < 1e-14) continue;
        double slope = std::abs(fn(a) - fn(b)) / dist;
        if (slope > best) {
            best = slope;
            if (witness) {
                witness->assign(a.begin(), a.end());
                witness->insert(witness->end(), b.begin(), b.end());
            }
        }
    }
    return best;
}

namespace {

struct RatioLadder {
    double constant = 0.0;
    bool growing = false;
    std::vector<double> worst_point;
};

// Max of `ratio` over sampled points with marks on a dyadic |e| ladder. The
// bound C (1 ^ |e|)^pow is existential: the entry fails only when the sampled
// ratio keeps growing as |e| shrinks.
RatioLadder probe_mark_ladder(const std::function<double(double, std::vector<double>&)>& ratio_at,
                              int octaves, int per_octave, RngStream& rng) {
    RatioLadder out;
    std::vector<double> per_oct(static_cast<std::size_t>(octaves), 0.0);
    std::vector<double> point;
    for (int oct = 0; oct < octaves; ++oct) {
        double r_hi = std::pow(2.0, -oct);
        for (int s = 0; s < per_octave; ++s) {
            double r = r_hi * (0.5 + 0.5 * rng.uniform());
            double v = ratio_at(r, point);
            if (v > per_oct[static_cast<std::size_t>(oct)])
                per_oct[static_cast<std::size_t>(oct)] = v;
            if (v > out.constant) {
                out.constant = v;
                out.worst_point = point;
            }
        }
    }
    int grows = 0;
    for (int oct = 1; oct < octaves; ++oct) {
        double prev = per_oct[static_cast<std::size_t>(oct - 1)];
        double cur = per_oct[static_cast<std::size_t>(oct)];
        if (prev > 0.0 && cur > 1.7 * prev) {
            if (++grows >= 3) out.growing = true;
        } else if (cur > 0.0) {
            grows = 0;
        }
    }
    return out;
}

double fit_growth_exponent(const std::vector<std::pair<double, double>>& radius_value) {
    // Log-log fit of per-octave maxima, as for the field envelope.
    constexpr int kMin = -1, kMax = 12;
    double oct_max[kMax - kMin + 1] = {};
    bool seen[kMax - kMin + 1] = {};
    for (auto [r, v] : radius_value) {
        if (r < 0.5 || v <= 1e-14) continue;
        int oct = std::clamp(static_cast<int>(std::floor(std::log2(r))), kMin, kMax);
        auto slot = static_cast<std::size_t>(oct - kMin);
        oct_max[slot] = std::max(oct_max[slot], v);
        seen[slot] = true;
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int n = 0;
    for (int oct = kMin; oct <= kMax; ++oct) {
        auto slot = static_cast<std::size_t>(oct - kMin);
        if (!seen[slot]) continue;
        double lx = oct * std::numbers::ln2_v<double>;
        double ly = std::log(oct_max[slot]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2 || n * sxx - sx * sx <= 1e-12) return 0.0;
    return std::clamp((n * sxy - sx * sy) / (n * sxx - sx * sx), 0.0, 12.0);
}

} // namespace

bool AssumptionReport::all_pass() const {
    for (const auto& e : entries)
        if (!e.pass) return false;
    return true;
}

const AssumptionEntry* AssumptionReport::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

double AssumptionReport::driver_lipschitz() const {
    double c = 0.0;
    for (const auto& e : entries)
        if (e.name.rfind("driver_yzq_lipschitz", 0) == 0) c = std::max(c, e.constant);
    return c;
}

AssumptionReport check_assumptions(const ModelSpec& spec, const Box& x_box, int samples,
                                   std::uint64_t seed) {
    spec.check_consistent();
    const auto k = static_cast<std::size_t>(spec.dims.state_k);
    const auto l = static_cast<std::size_t>(spec.dims.mark_l);
    const auto m = static_cast<std::size_t>(spec.dims.components_m);
    const auto d = static_cast<std::size_t>(spec.dims.brownian_d);
    if (x_box.dim() != k) throw ConfigError("check_assumptions: box dimension mismatch");
    AssumptionReport report;
    RngStream rng(seed);
    const int octaves = 24;
    const int per_octave = std::max(8, samples / octaves);

    auto random_x = [&](RngStream& r, std::vector<double>& x) {
        x.resize(k);
        for (std::size_t i = 0; i < k; ++i) x[i] = r.uniform(x_box.lo[i], x_box.hi[i]);
    };
    auto random_mark_dir = [&](RngStream& r, double radius, std::vector<double>& e) {
        e.assign(l, 0.0);
        if (l == 1) {
            e[0] = r.uniform() < 0.5 ? radius : -radius;
        } else {
            double n2 = 0.0;
            for (auto& c : e) {
                c = r.normal();
                n2 += c * c;
            }
            double n = std::sqrt(n2);
            for (auto& c : e) c *= radius / (n > 0 ? n : 1.0);
        }
    };

    // (beta) small-jump envelope |beta| <= C (1 ^ |e|).
    {
        RngStream sub = rng.split(1);
        std::vector<double> x, e, beta(k);
        auto ratio = [&](double r, std::vector<double>& point) {
            random_x(sub, x);
            random_mark_dir(sub, r, e);
            double t = sub.uniform(0.0, spec.horizon);
            spec.jump_coef(t, x, e, beta);
            double norm = 0.0;
            for (double v : beta) norm += v * v;
            norm = std::sqrt(norm);
            point.clear();
            point.push_back(t);
            point.insert(point.end(), x.begin(), x.end());
            point.insert(point.end(), e.begin(), e.end());
            return norm / std::min(1.0, r);
        };
        auto ladder = probe_mark_ladder(ratio, octaves, per_octave, sub);
        report.entries.push_back({"beta_small_jump_bound", ladder.constant, 0.0,
                                  static_cast<long>(octaves) * per_octave, ladder.worst_point,
                                  "(t, x, e) maximising |beta|/(1^|e|)", !ladder.growing});
    }
    // (beta) x-increment bound |beta(t,x,e)-beta(t,x',e)| <= C |x-x'| (1 ^ |e|).
    {
        RngStream sub = rng.split(2);
        std::vector<double> x1, x2, e, b1(k), b2(k);
        auto ratio = [&](double r, std::vector<double>& point) {
            random_x(sub, x1);
            random_x(sub, x2);
            random_mark_dir(sub, r, e);
            double t = sub.uniform(0.0, spec.horizon);
            spec.jump_coef(t, x1, e, b1);
            spec.jump_coef(t, x2, e, b2);
            double num = 0.0, dx = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                num += (b1[i] - b2[i]) * (b1[i] - b2[i]);
                dx += (x1[i] - x2[i]) * (x1[i] - x2[i]);
            }
            if (dx < 1e-20) return 0.0;
            point.clear();
            point.push_back(t);
            point.insert(point.end(), x1.begin(), x1.end());
            point.insert(point.end(), x2.begin(), x2.end());
            point.insert(point.end(), e.begin(), e.end());
            return std::sqrt(num / dx) / std::min(1.0, r);
        };
        auto ladder = probe_mark_ladder(ratio, octaves, per_octave, sub);
        report.entries.push_back({"beta_x_lipschitz", ladder.constant, 0.0,
                                  static_cast<long>(octaves) * per_octave, ladder.worst_point,
                                  "(t, x, x', e) maximising the beta x-increment ratio",
                                  !ladder.growing});
    }
    // (gamma) per component: envelope and weighted x-increment.
    for (std::size_t i = 0; i < m; ++i) {
        const auto& gamma = spec.jump_weight[i];
        {
            RngStream sub = rng.split(100 + i);
            std::vector<double> x, e;
            auto ratio = [&](double r, std::vector<double>& point) {
                random_x(sub, x);
                random_mark_dir(sub, r, e);
                double t = sub.uniform(0.0, spec.horizon);
                double v = std::abs(gamma(t, x, e));
                point.clear();
                point.push_back(t);
                point.insert(point.end(), x.begin(), x.end());
                point.insert(point.end(), e.begin(), e.end());
                return v / std::min(1.0, r);
            };
            auto ladder = probe_mark_ladder(ratio, octaves, per_octave, sub);
            report.entries.push_back({"gamma_small_jump_bound[" + std::to_string(i) + "]",
                                      ladder.constant, 0.0, static_cast<long>(octaves) * per_octave,
                                      ladder.worst_point, "(t, x, e) maximising |gamma|/(1^|e|)",
                                      !ladder.growing});
        }
        {
            RngStream sub = rng.split(200 + i);
            std::vector<double> x1, x2, e;
            std::vector<std::pair<double, double>> rad_val;
            auto ratio = [&](double r, std::vector<double>& point) {
                random_x(sub, x1);
                random_x(sub, x2);
                random_mark_dir(sub, r, e);
                double t = sub.uniform(0.0, spec.horizon);
                double num = std::abs(gamma(t, x1, e) - gamma(t, x2, e));
                double dx = 0.0, r1 = 0.0, r2 = 0.0;
                for (std::size_t c = 0; c < k; ++c) {
                    dx += (x1[c] - x2[c]) * (x1[c] - x2[c]);
                    r1 += x1[c] * x1[c];
                    r2 += x2[c] * x2[c];
                }
                dx = std::sqrt(dx);
                if (dx < 1e-10) return 0.0;
                double bare = num / (dx * std::min(1.0, r));
                rad_val.push_back({std::sqrt(std::max(r1, r2)), bare});
                point.clear();
                point.push_back(t);
                point.insert(point.end(), x1.begin(), x1.end());
                point.insert(point.end(), x2.begin(), x2.end());
                point.insert(point.end(), e.begin(), e.end());
                return bare; // growth factor folded in below
            };
            auto ladder = probe_mark_ladder(ratio, octaves, per_octave, sub);
            double p = fit_growth_exponent(rad_val);
            double cmax = 0.0;
            for (auto [r, v] : rad_val) cmax = std::max(cmax, v / (1.0 + 2.0 * std::pow(r, p)));
            report.entries.push_back({"gamma_x_increment[" + std::to_string(i) + "]", cmax, p,
                                      static_cast<long>(rad_val.size()), ladder.worst_point,
                                      "(t, x, x', e) maximising the weighted gamma x-increment",
                                      !ladder.growing});
        }
    }
    // (g) increment class and (h) x-increment class + (y,z,q) Lipschitz.
    std::vector<double> probe_y(m, 0.3), probe_z(d, -0.2);
    for (std::size_t i = 0; i < m; ++i) {
        {
            RngStream sub = rng.split(300 + i);
            const auto& g = spec.terminal[i];
            std::vector<double> x1, x2;
            std::vector<std::pair<double, double>> rad_val;
            double cmax_raw = 0.0;
            std::vector<double> worst;
            for (int s = 0; s < samples; ++s) {
                random_x(sub, x1);
                random_x(sub, x2);
                double dx = 0.0, r1 = 0.0, r2 = 0.0;
                for (std::size_t c = 0; c < k; ++c) {
                    dx += (x1[c] - x2[c]) * (x1[c] - x2[c]);
                    r1 += x1[c] * x1[c];
                    r2 += x2[c] * x2[c];
                }
                dx = std::sqrt(dx);
                if (dx < 1e-12) continue;
                double v = std::abs(g(x1) - g(x2)) / dx;
                rad_val.push_back({std::sqrt(std::max(r1, r2)), v});
                if (v > cmax_raw) {
                    cmax_raw = v;
                    worst = x1;
                    worst.insert(worst.end(), x2.begin(), x2.end());
                }
            }
            double p = fit_growth_exponent(rad_val);
            double cfit = 0.0;
            for (auto [r, v] : rad_val) cfit = std::max(cfit, v / (1.0 + 2.0 * std::pow(r, p)));
            report.entries.push_back({"terminal_class_U[" + std::to_string(i) + "]", cfit, p,
                                      static_cast<long>(rad_val.size()), worst,
                                      "(x, x') maximising the terminal increment ratio", true});
        }
        {
            RngStream sub = rng.split(400 + i);
            const auto& h = spec.driver[i];
            std::vector<double> x1, x2;
            std::vector<std::pair<double, double>> rad_val;
            for (int s = 0; s < samples; ++s) {
                random_x(sub, x1);
                random_x(sub, x2);
                double t = sub.uniform(0.0, spec.horizon);
                double q = sub.uniform(-1.0, 1.0);
                double dx = 0.0, r1 = 0.0, r2 = 0.0;
                for (std::size_t c = 0; c < k; ++c) {
                    dx += (x1[c] - x2[c]) * (x1[c] - x2[c]);
                    r1 += x1[c] * x1[c];
                    r2 += x2[c] * x2[c];
                }
                dx = std::sqrt(dx);
                if (dx < 1e-12) continue;
                double v = std::abs(h(t, x1, probe_y, probe_z, q) - h(t, x2, probe_y, probe_z, q)) / dx;
                rad_val.push_back({std::sqrt(std::max(r1, r2)), v});
            }
            double p = fit_growth_exponent(rad_val);
            double cfit = 0.0;
            for (auto [r, v] : rad_val) cfit = std::max(cfit, v / (1.0 + 2.0 * std::pow(r, p)));
            report.entries.push_back(
                {"driver_x_class_U[" + std::to_string(i) + "]", cfit, p,
                 static_cast<long>(rad_val.size()), {},
                 "finite (y,z,q) probe set only; uniformity in (y,z,q) is not certified", true});
        }
        {
            RngStream sub = rng.split(500 + i);
            const auto& h = spec.driver[i];
            std::vector<double> x0(k, 0.0);
            for (std::size_t c = 0; c < k; ++c)
                x0[c] = 0.5 * (x_box.lo[c] + x_box.hi[c]);
            Box yzq_box;
            yzq_box.lo.assign(m + d + 1, -3.0);
            yzq_box.hi.assign(m + d + 1, 3.0);
            std::vector<int> active(m + d + 1);
            for (std::size_t c = 0; c < active.size(); ++c) active[c] = static_cast<int>(c);
            std::vector<double> witness;
            auto fn = [&](std::span<const double> pt) {
                std::span<const double> y(pt.data(), m);
                std::span<const double> z(pt.data() + m, d);
                return h(0.5 * spec.horizon, x0, y, z, pt[m + d]);
            };
            double c = estimate_lipschitz(fn, yzq_box, active, samples,
                                          sub.next_u64(), &witness);
            report.entries.push_back({"driver_yzq_lipschitz[" + std::to_string(i) + "]", c, 0.0,
                                      samples, witness, "(y,z,q) pair maximising the driver slope",
                                      true});
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Model zoo
// ---------------------------------------------------------------------------

namespace {

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void reject_unknown_params(const std::string& model, const std::map<std::string, double>& params,
                           std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : params) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError("unknown parameter '" + key + "' for model '" + model + "'");
    }
}

double mark_norm(std::span<const double> e) {
    double r2 = 0.0;
    for (double v : e) r2 += v * v;
    return std::sqrt(r2);
}

} // namespace

ModelSpec make_model(const std::string& name, const std::map<std::string, double>& params,
                     std::shared_ptr<const LevyMeasure> measure) {
    ModelSpec spec;
    spec.name = name;
    if (!measure)
        measure = std::make_shared<const LevyMeasure>(LevyMeasure::tempered_stable(1.0, 0.5, 50.0));
    spec.measure = measure;

    if (name == "linear_additive") {
        reject_unknown_params(name, params, {"b", "sigma", "beta", "gamma", "T"});
        double b = get_param(params, "b", 0.1);
        double sig = get_param(params, "sigma", 0.2);
        double bc = get_param(params, "beta", 0.3);
        double gc = get_param(params, "gamma", 1.0);
        spec.dims = {1, 1, 1, 1};
        spec.horizon = get_param(params, "T", 1.0);
        spec.drift = [b](double, std::span<const double>, std::span<double> out) { out[0] = b; };
        spec.diffusion = [sig](double, std::span<const double>, std::span<double> out) {
            out[0] = sig;
        };
        spec.jump_coef = [bc](double, std::span<const double>, std::span<const double> e,
                              std::span<double> out) { out[0] = bc * std::min(1.0, mark_norm(e)); };
        spec.beta_state_independent = true;
        spec.terminal = {[](std::span<const double> x) { return x[0]; }};
        spec.driver = {[](double, std::span<const double>, std::span<const double>,
                          std::span<const double>, double) { return 0.0; }};
        spec.driver_uses_q = {0};
        spec.jump_weight = {[gc](double, std::span<const double>, std::span<const double> e) {
            return gc * std::min(1.0, mark_norm(e));
        }};
        return spec;
    }
    if (name == "coupled_sine") {
        reject_unknown_params(name, params, {"sigma", "beta", "gamma", "a_y", "a_q", "T"});
        double sig = get_param(params, "sigma", 0.25);
        double bc = get_param(params, "beta", 0.2);
        double gc = get_param(params, "gamma", 0.5);
        double ay = get_param(params, "a_y", 0.5);
        double aq = get_param(params, "a_q", 0.5);
        spec.dims = {1, 1, 2, 1};
        spec.horizon = get_param(params, "T", 1.0);
        spec.drift = [](double, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
        spec.diffusion = [sig](double, std::span<const double>, std::span<double> out) {
            out[0] = sig;
        };
        spec.jump_coef = [bc](double, std::span<const double>, std::span<const double> e,
                              std::span<double> out) { out[0] = bc * std::min(1.0, mark_norm(e)); };
        spec.beta_state_independent = true;
        spec.terminal = {[](std::span<const double> x) { return std::sin(x[0]); },
                         [](std::span<const double> x) { return std::cos(x[0]); }};
        // Coupled through the other component and through q with no
        // monotonicity in q; the jump weights change sign in x.
        spec.driver = {[ay, aq](double, std::span<const double>, std::span<const double> y,
                                std::span<const double>, double q) {
                           return ay * std::sin(y[1]) + aq * std::sin(q);
                       },
                       [ay, aq](double, std::span<const double>, std::span<const double> y,
                                std::span<const double>, double q) {
                           return ay * std::cos(y[0]) + aq * std::sin(q);
                       }};
        spec.jump_weight = {[gc](double, std::span<const double> x, std::span<const double> e) {
                                return gc * std::min(1.0, mark_norm(e)) * std::cos(x[0]);
                            },
                            [gc](double, std::span<const double> x, std::span<const double> e) {
                                return gc * std::min(1.0, mark_norm(e)) * std::sin(x[0]);
                            }};
        return spec;
    }
    if (name == "norm_coupling_demo") {
        reject_unknown_params(name, params, {"sigma", "beta", "a_y", "a_q", "c0", "T"});
        double sig = get_param(params, "sigma", 0.25);
        double bc = get_param(params, "beta", 0.2);
        double ayc = get_param(params, "a_y", -0.3);
        double aqc = get_param(params, "a_q", 0.4);
        double c0 = get_param(params, "c0", 0.2);
        spec.dims = {1, 1, 1, 1};
        spec.horizon = get_param(params, "T", 1.0);
        spec.coupling = CouplingMode::NormCoupling;
        spec.drift = [](double, std::span<const double>, std::span<double> out) { out[0] = 0.0; };
        spec.diffusion = [sig](double, std::span<const double>, std::span<double> out) {
            out[0] = sig;
        };
        spec.jump_coef = [bc](double, std::span<const double>, std::span<const double> e,
                              std::span<double> out) { out[0] = bc * std::min(1.0, mark_norm(e)); };
        spec.beta_state_independent = true;
        spec.terminal = {[](std::span<const double> x) { return std::sin(x[0]); }};
        spec.driver = {[ayc, aqc, c0](double, std::span<const double>, std::span<const double> y,
                                      std::span<const double>, double q) {
            return ayc * y[0] + aqc * q + c0;
        }};
        spec.jump_weight = {[](double, std::span<const double>, std::span<const double> e) {
            return std::min(1.0, mark_norm(e));
        }};
        return spec;
    }
    throw UnknownName("unknown model '" + name + "'");
}

std::vector<std::string> model_names() {
    return {"linear_additive", "coupled_sine", "norm_coupling_demo"};
}

std::string describe_model(const std::string& name) {
    if (name == "linear_additive") {
        return "linear_additive{b,sigma,beta,gamma,T}: one component, constant drift b and "
               "volatility sigma, state-independent jump size beta*(1^|e|), terminal g(x)=x, "
               "driver h=0. Closed form u(t,x) = x + b*(T-t); used as the closed-form anchor for "
               "both solvers. Default assumption constants: C_beta=beta, C_gamma=gamma, "
               "Lip_h=0.";
    }
    if (name == "coupled_sine") {
        return "coupled_sine{sigma,beta,gamma,a_y,a_q,T}: two components coupled through each "
               "other's value and through the jump channel q, with h depending on q via "
               "a_q*sin(q) — deliberately NON-MONOTONE in q — and jump weights "
               "gamma*(1^|e|)*cos(x), gamma*(1^|e|)*sin(x) that CHANGE SIGN in x. Terminal "
               "sin(x), cos(x). This is the regime where the value-function coupling must be "
               "evaluated on the solution field itself rather than on test functions.";
    }
    if (name == "norm_coupling_demo") {
        return "norm_coupling_demo{sigma,beta,a_y,a_q,c0,T}: one component whose driver takes the "
               "L2(lambda) NORM of the jump kernel as its coupling scalar (q >= 0), "
               "h = a_y*y + a_q*q + c0. Exercises the norm-coupled solver mode end to end.";
    }
    throw UnknownName("unknown model '" + name + "'");
}

} // namespace levybsde
