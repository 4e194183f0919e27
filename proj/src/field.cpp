#include "levybsde/field.hpp"

#include "levybsde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace levybsde {

TimeGrid TimeGrid::uniform(double t0, double T, int n_steps) {
    if (!(T > t0) || n_steps < 1) throw GridMismatch("time grid requires T > t0 and n_steps >= 1");
    return TimeGrid{t0, T, n_steps};
}

ValueField::ValueField(int components, std::vector<double> t_nodes, std::vector<Axis> axes)
    : components_(components), t_nodes_(std::move(t_nodes)), axes_(std::move(axes)) {
    if (components_ < 1 || t_nodes_.empty() || axes_.empty())
        throw GridMismatch("value field needs components, time nodes and axes");
    for (std::size_t i = 1; i < t_nodes_.size(); ++i)
        if (!(t_nodes_[i] > t_nodes_[i - 1])) throw GridMismatch("time nodes must increase");
    x_count_ = 1;
    for (const auto& a : axes_) {
        if (a.n < 2 || !(a.hi > a.lo)) throw GridMismatch("axis needs n >= 2 and hi > lo");
        x_count_ *= static_cast<std::size_t>(a.n);
    }
    values_.assign(static_cast<std::size_t>(components_) * t_nodes_.size() * x_count_, 0.0);
    envelopes_.assign(static_cast<std::size_t>(components_), GrowthEnvelope{});
}

ValueField ValueField::from_function(
    int components, std::vector<double> t_nodes, std::vector<Axis> axes,
    const std::function<double(int, double, std::span<const double>)>& f) {
    ValueField field(components, std::move(t_nodes), std::move(axes));
    std::vector<double> x(static_cast<std::size_t>(field.state_dim()));
    for (int c = 0; c < field.components(); ++c) {
        for (std::size_t ti = 0; ti < field.t_nodes().size(); ++ti) {
            for (std::size_t xi = 0; xi < field.x_count(); ++xi) {
                field.x_of_flat(xi, x);
                field.value_at(c, static_cast<int>(ti), xi) = f(c, field.t_nodes()[ti], x);
            }
        }
    }
    field.refit_envelope();
    return field;
}

double ValueField::min_dx() const {
    double m = axes_[0].dx();
    for (const auto& a : axes_) m = std::min(m, a.dx());
    return m;
}

double& ValueField::value_at(int comp, int t_index, std::size_t x_flat) {
    return values_[(static_cast<std::size_t>(comp) * t_nodes_.size() +
                    static_cast<std::size_t>(t_index)) *
                       x_count_ +
                   x_flat];
}

double ValueField::value_at(int comp, int t_index, std::size_t x_flat) const {
    return values_[(static_cast<std::size_t>(comp) * t_nodes_.size() +
                    static_cast<std::size_t>(t_index)) *
                       x_count_ +
                   x_flat];
}

std::size_t ValueField::flat_index(std::span<const int> idx) const {
    std::size_t flat = 0;
    for (std::size_t d = 0; d < axes_.size(); ++d)
        flat = flat * static_cast<std::size_t>(axes_[d].n) + static_cast<std::size_t>(idx[d]);
    return flat;
}

void ValueField::x_of_flat(std::size_t flat, std::span<double> out) const {
    for (std::size_t d = axes_.size(); d-- > 0;) {
        auto n = static_cast<std::size_t>(axes_[d].n);
        out[d] = axes_[d].node(static_cast<int>(flat % n));
        flat /= n;
    }
}

double ValueField::eval_clamped(int comp, double t, std::span<const double> x) const {
    const auto nt = t_nodes_.size();
    std::size_t t_idx = 0;
    double tw = 0.0;
    if (nt > 1) {
        auto it = std::upper_bound(t_nodes_.begin(), t_nodes_.end(), t);
        std::size_t hi = static_cast<std::size_t>(std::distance(t_nodes_.begin(), it));
        if (hi == 0) {
            t_idx = 0;
            tw = 0.0;
        } else if (hi >= nt) {
            t_idx = nt - 2;
            tw = 1.0;
        } else {
            t_idx = hi - 1;
            tw = (t - t_nodes_[t_idx]) / (t_nodes_[t_idx + 1] - t_nodes_[t_idx]);
        }
    }
    const std::size_t k = axes_.size();
    int base_idx[8];
    double wts[8];
    if (k > 8) throw GridMismatch("value field supports state dimension <= 8");
    for (std::size_t d = 0; d < k; ++d) {
        const auto& a = axes_[d];
        double xi = std::clamp(x[d], a.lo, a.hi);
        double rel = (xi - a.lo) / a.dx();
        int i0 = std::min(static_cast<int>(rel), a.n - 2);
        i0 = std::max(i0, 0);
        base_idx[d] = i0;
        wts[d] = std::clamp(rel - i0, 0.0, 1.0);
    }
    auto corner_value = [&](std::size_t t_node) {
        double acc = 0.0;
        const std::size_t corners = std::size_t{1} << k;
        for (std::size_t c = 0; c < corners; ++c) {
            double w = 1.0;
            std::size_t flat = 0;
            for (std::size_t d = 0; d < k; ++d) {
                int bit = static_cast<int>((c >> d) & 1u);
                w *= bit ? wts[d] : 1.0 - wts[d];
                flat = flat * static_cast<std::size_t>(axes_[d].n) +
                       static_cast<std::size_t>(base_idx[d] + bit);
            }
            if (w != 0.0) acc += w * value_at(comp, static_cast<int>(t_node), flat);
        }
        return acc;
    };
    if (nt == 1 || tw == 0.0) return corner_value(t_idx);
    if (tw == 1.0) return corner_value(t_idx + 1);
    return (1.0 - tw) * corner_value(t_idx) + tw * corner_value(t_idx + 1);
}

double ValueField::eval(int comp, double t, std::span<const double> x) const {
    double base = eval_clamped(comp, t, x);
    double r2 = 0.0, rc2 = 0.0;
    bool outside = false;
    for (std::size_t d = 0; d < axes_.size(); ++d) {
        double xi = x[d];
        double xc = std::clamp(xi, axes_[d].lo, axes_[d].hi);
        if (xi != xc) outside = true;
        r2 += xi * xi;
        rc2 += xc * xc;
    }
    if (!outside) return base;
    const auto& env = envelopes_[static_cast<std::size_t>(comp)];
    if (env.c <= 0.0 || env.p <= 0.0) return base;
    double growth = env.c * (std::pow(r2, 0.5 * env.p) - std::pow(rc2, 0.5 * env.p));
    if (growth <= 0.0) return base;
    // Grow away from zero so the extension respects the fitted envelope bound.
    return base + (base >= 0.0 ? growth : -growth);
}

void ValueField::refit_envelope() {
    std::vector<double> x(static_cast<std::size_t>(state_dim()));
    for (int c = 0; c < components_; ++c) {
        constexpr int kMinOct = -1, kMaxOct = 12;
        double oct_max[kMaxOct - kMinOct + 1] = {};
        bool oct_seen[kMaxOct - kMinOct + 1] = {};
        for (std::size_t xi = 0; xi < x_count_; ++xi) {
            x_of_flat(xi, x);
            double r = 0.0;
            for (double v : x) r += v * v;
            r = std::sqrt(r);
            if (r < 0.5) continue;
            double v = 0.0;
            for (std::size_t ti = 0; ti < t_nodes_.size(); ++ti)
                v = std::max(v, std::abs(value_at(c, static_cast<int>(ti), xi)));
            int oct = std::clamp(static_cast<int>(std::floor(std::log2(r))), kMinOct, kMaxOct);
            auto slot = static_cast<std::size_t>(oct - kMinOct);
            oct_max[slot] = std::max(oct_max[slot], v);
            oct_seen[slot] = true;
        }
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        int n = 0;
        for (int oct = kMinOct; oct <= kMaxOct; ++oct) {
            auto slot = static_cast<std::size_t>(oct - kMinOct);
            if (!oct_seen[slot] || oct_max[slot] <= 1e-14) continue;
            double lx = oct * std::numbers::ln2_v<double>;
            double ly = std::log(oct_max[slot]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++n;
        }
        GrowthEnvelope env;
        if (n >= 2 && n * sxx - sx * sx > 1e-12) {
            env.p = std::clamp((n * sxy - sx * sy) / (n * sxx - sx * sx), 0.0, 12.0);
        }
        double cmax = 0.0;
        for (std::size_t xi = 0; xi < x_count_; ++xi) {
            x_of_flat(xi, x);
            double r = 0.0;
            for (double v : x) r += v * v;
            r = std::sqrt(r);
            double denom = 1.0 + std::pow(r, env.p);
            for (std::size_t ti = 0; ti < t_nodes_.size(); ++ti)
                cmax = std::max(cmax, std::abs(value_at(c, static_cast<int>(ti), xi)) / denom);
        }
        env.c = cmax;
        envelopes_[static_cast<std::size_t>(c)] = env;
    }
}

bool ValueField::same_lattice(const ValueField& other) const {
    if (components_ != other.components_ || axes_.size() != other.axes_.size()) return false;
    if (t_nodes_ != other.t_nodes_) return false;
    for (std::size_t d = 0; d < axes_.size(); ++d) {
        if (axes_[d].n != other.axes_[d].n || axes_[d].lo != other.axes_[d].lo ||
            axes_[d].hi != other.axes_[d].hi)
            return false;
    }
    return true;
}

double ValueField::sup_lattice_distance(const ValueField& a, const ValueField& b) {
    if (!a.same_lattice(b)) throw GridMismatch("sup_lattice_distance requires identical lattices");
    double d = 0.0;
    for (int c = 0; c < a.components(); ++c)
        for (std::size_t ti = 0; ti < a.t_nodes().size(); ++ti)
            for (std::size_t xi = 0; xi < a.x_count(); ++xi)
                d = std::max(d, std::abs(a.value_at(c, static_cast<int>(ti), xi) -
                                         b.value_at(c, static_cast<int>(ti), xi)));
    return d;
}

} // namespace levybsde
