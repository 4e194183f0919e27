#pragma once

#include <functional>
#include <span>
#include <vector>

namespace levybsde {

struct TimeGrid {
    double t0 = 0.0;
    double horizon = 1.0; // final time T
    int n_steps = 1;

    static TimeGrid uniform(double t0, double T, int n_steps);
    double dt() const { return (horizon - t0) / n_steps; }
    int n_nodes() const { return n_steps + 1; }
    double node(int j) const { return j == n_steps ? horizon : t0 + dt() * j; }
    bool operator==(const TimeGrid&) const = default;
};

struct GrowthEnvelope {
    double c = 0.0;
    double p = 0.0;
};

// Deterministic function estimate u^i(t,x) on a space-time lattice. Inside
// the box evaluation is multilinear; outside, the value at the nearest
// boundary point is extended by the fitted polynomial growth envelope, which
// makes evaluation total on [t0,T] x R^k.
class ValueField {
public:
    struct Axis {
        double lo = 0.0, hi = 1.0;
        int n = 2; // node count, >= 2
        double dx() const { return (hi - lo) / (n - 1); }
        double node(int i) const { return i == n - 1 ? hi : lo + dx() * i; }
    };

    ValueField() = default;
    ValueField(int components, std::vector<double> t_nodes, std::vector<Axis> axes);

    static ValueField from_function(
        int components, std::vector<double> t_nodes, std::vector<Axis> axes,
        const std::function<double(int, double, std::span<const double>)>& f);

    int components() const { return components_; }
    int state_dim() const { return static_cast<int>(axes_.size()); }
    const std::vector<double>& t_nodes() const { return t_nodes_; }
    const std::vector<Axis>& axes() const { return axes_; }
    std::size_t x_count() const { return x_count_; }
    double min_dx() const;

    double& value_at(int comp, int t_index, std::size_t x_flat);
    double value_at(int comp, int t_index, std::size_t x_flat) const;

    // Multi-index <-> flat conversions (row-major over axes).
    std::size_t flat_index(std::span<const int> idx) const;
    void x_of_flat(std::size_t flat, std::span<double> out) const;

    /// Total evaluation: clamps t, multilinear inside the box, envelope clamp
    /// outside.
    double eval(int comp, double t, std::span<const double> x) const;
    /// Multilinear evaluation with every coordinate clamped to the box (no
    /// growth term); the raw ingredient of eval().
    double eval_clamped(int comp, double t, std::span<const double> x) const;

    const GrowthEnvelope& envelope(int comp) const { return envelopes_[static_cast<std::size_t>(comp)]; }
    void set_envelope(int comp, const GrowthEnvelope& env) {
        envelopes_[static_cast<std::size_t>(comp)] = env;
    }
    /// Fits |u| <= C (1 + |x|^p) per component from the lattice values.
    void refit_envelope();

    bool same_lattice(const ValueField& other) const;
    /// max over lattice nodes of |a - b| (per shared component count).
    static double sup_lattice_distance(const ValueField& a, const ValueField& b);

private:
    int components_ = 0;
    std::vector<double> t_nodes_;
    std::vector<Axis> axes_;
    std::size_t x_count_ = 0;
    std::vector<double> values_; // [comp][t][x_flat]
    std::vector<GrowthEnvelope> envelopes_;
};

} // namespace levybsde
