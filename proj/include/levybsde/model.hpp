#pragma once

#include "levybsde/levy.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace levybsde {

struct Dims {
    int state_k = 1;
    int brownian_d = 1;
    int components_m = 1;
    int mark_l = 1;
};

enum class CouplingMode { GammaIntegral, NormCoupling };

/// Function on E with a declared small-mark decay order: 0 means O(1 ^ |e|)
/// (the class of jump increments of locally Lipschitz fields), 2 means
/// O(1 ^ |e|^2). Undeclared kernels default to order 0.
struct MarkKernel {
    std::function<double(std::span<const double>)> fn;
    int decay_order = 0;
};

/// The full problem datum. All callables must be total on their domains and
/// safe for concurrent invocation; instances are immutable after construction.
struct ModelSpec {
    Dims dims;
    double horizon = 1.0;
    // b(t,x) -> R^k
    std::function<void(double, std::span<const double>, std::span<double>)> drift;
    // sigma(t,x) -> R^{k x d}, row-major
    std::function<void(double, std::span<const double>, std::span<double>)> diffusion;
    // beta(t,x,e) -> R^k
    std::function<void(double, std::span<const double>, std::span<const double>, std::span<double>)>
        jump_coef;
    // g^i(x)
    std::vector<std::function<double(std::span<const double>)>> terminal;
    // h^i(t, x, y, z_i, q)
    std::vector<std::function<double(double, std::span<const double>, std::span<const double>,
                                     std::span<const double>, double)>>
        driver;
    // gamma_i(t,x,e)
    std::vector<std::function<double(double, std::span<const double>, std::span<const double>)>>
        jump_weight;
    std::shared_ptr<const LevyMeasure> measure;
    CouplingMode coupling = CouplingMode::GammaIntegral;
    // Declared structure used for caching; never changes results, only cost.
    bool beta_state_independent = false;
    std::vector<std::uint8_t> driver_uses_q; // per component; empty means "all true"
    std::string name = "custom";

    bool uses_q(int i) const {
        return driver_uses_q.empty() || driver_uses_q[static_cast<std::size_t>(i)] != 0;
    }
    void check_consistent() const;
};

/// Composed generator f^i(t,x,y,z,zeta): the driver h^i evaluated at the
/// coupling scalar built from zeta. GammaIntegral mode couples through
/// integral of gamma_i * zeta d(lambda); NormCoupling through the L2(lambda)
/// norm of zeta.
using Generator = std::function<double(double, std::span<const double>, std::span<const double>,
                                       std::span<const double>, const MarkKernel&)>;
Generator compose_generator(const ModelSpec& spec, int i, const QuadSpec& quad = QuadSpec{});

struct Box {
    std::vector<double> lo, hi;
    std::size_t dim() const { return lo.size(); }
};

/// Sampled lower bound on the Lipschitz constant of fn along the selected
/// coordinates; pair distances are drawn log-uniformly so short-range slopes
/// are probed as well. Returns the maximising pair through `witness` (2*dim
/// values) when requested.
double estimate_lipschitz(const std::function<double(std::span<const double>)>& fn, const Box& domain,
                          std::span<const int> active_coords, int samples,
                          std::uint64_t seed = 1234, std::vector<double>* witness = nullptr);

struct AssumptionEntry {
    std::string name;
    double constant = 0.0;
    double growth_p = 0.0; // fitted polynomial-growth exponent where applicable
    long samples = 0;
    std::vector<double> witness; // worst sampled point, layout in witness_desc
    std::string witness_desc;
    bool pass = true;
};

struct AssumptionReport {
    std::vector<AssumptionEntry> entries;
    bool all_pass() const;
    const AssumptionEntry* find(const std::string& name) const;
    /// Largest sampled driver Lipschitz constant in (y,z,q); feeds the Picard
    /// window auto-sizing.
    double driver_lipschitz() const;
};

/// Statistical verification of the standing assumptions on (beta, gamma, g, h)
/// over a state box: small-jump envelopes with their x-increment variants, the
/// polynomial-growth increment class of g and x -> h, and the (y,z,q)
/// Lipschitz constants. Bounds are existential, so entries fail only when the
/// sampled ratios grow systematically where a uniform constant should exist.
AssumptionReport check_assumptions(const ModelSpec& spec, const Box& x_box, int samples,
                                   std::uint64_t seed = 20240601);

/// Built-in model zoo: linear_additive (closed-form anchor), coupled_sine
/// (two components, sign-changing jump weights, non-monotone coupling) and
/// norm_coupling_demo (norm-coupled scalar channel).
ModelSpec make_model(const std::string& name, const std::map<std::string, double>& params,
                     std::shared_ptr<const LevyMeasure> measure = nullptr);
std::vector<std::string> model_names();
std::string describe_model(const std::string& name);

} // namespace levybsde
