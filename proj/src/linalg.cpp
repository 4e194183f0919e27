#include "levybsde/linalg.hpp"

#include "levybsde/errors.hpp"

#include <cmath>
#include <cstdlib>

namespace levybsde {

namespace {

bool try_factor(std::span<const double> a, std::size_t n, double shift,
                std::vector<double>& l) {
    l.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * n + j] + (i == j ? shift : 0.0);
            for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s)) return false;
                l[i * n + i] = std::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    return true;
}

} // namespace

CholeskyResult cholesky(std::span<const double> a, std::size_t n) {
    CholeskyResult out;
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += std::abs(a[i * n + i]);
    double base = (trace > 0.0 ? trace / static_cast<double>(n) : 1.0);
    double shift = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        if (try_factor(a, n, shift, out.factor)) {
            out.shift = shift;
            out.ok = true;
            return out;
        }
        shift = (shift == 0.0) ? base * 1e-12 : shift * 100.0;
    }
    out.ok = false;
    return out;
}

void cholesky_solve_inplace(const CholeskyResult& chol, std::size_t n, std::span<double> rhs) {
    const auto& l = chol.factor;
    for (std::size_t i = 0; i < n; ++i) {
        double s = rhs[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * rhs[k];
        rhs[i] = s / l[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = rhs[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * rhs[k];
        rhs[ii] = s / l[ii * n + ii];
    }
}

double condition_estimate(std::span<const double> a, std::size_t n) {
    if (n == 0) return 1.0;
    if (n == 1) return a[0] > 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    auto matvec = [&](const std::vector<double>& x, std::vector<double>& y) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * x[j];
            y[i] = s;
        }
    };
    std::vector<double> v(n, 1.0), w(n);
    double lmax = 0.0;
    for (int it = 0; it < 60; ++it) {
        matvec(v, w);
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
        lmax = norm;
    }
    auto chol = cholesky(a, n);
    if (!chol.ok) return std::numeric_limits<double>::infinity();
    // Inverse power iteration for the smallest eigenvalue.
    std::vector<double> u(n, 1.0);
    double lmin_inv = 0.0;
    for (int it = 0; it < 60; ++it) {
        cholesky_solve_inplace(chol, n, std::span<double>(u));
        double norm = 0.0;
        for (double x : u) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) u[i] /= norm;
        lmin_inv = norm;
    }
    double lmin = 1.0 / lmin_inv;
    if (chol.shift > 0.0) lmin = std::max(lmin - chol.shift, 1e-300);
    return lmax / lmin;
}

void tridiagonal_solve(std::span<const double> lower, std::span<const double> diag,
                       std::span<const double> upper, std::span<double> rhs) {
    const std::size_t n = diag.size();
    if (n == 0) return;
    std::vector<double> c(n, 0.0);
    double piv = diag[0];
    if (std::abs(piv) < 1e-300) throw TridiagonalSingular("zero pivot at row 0");
    c[0] = upper.empty() ? 0.0 : upper[0] / piv;
    rhs[0] /= piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = diag[i] - lower[i - 1] * c[i - 1];
        if (std::abs(piv) < 1e-300)
            throw TridiagonalSingular("zero pivot at row " + std::to_string(i));
        if (i < n - 1) c[i] = upper[i] / piv;
        rhs[i] = (rhs[i] - lower[i - 1] * rhs[i - 1]) / piv;
    }
    for (std::size_t ii = n - 1; ii-- > 0;) rhs[ii] -= c[ii] * rhs[ii + 1];
}

} // namespace levybsde
