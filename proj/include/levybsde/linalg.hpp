#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace levybsde {

// Dense symmetric positive semi-definite solver used by the regression code.
// Matrices are row-major n x n. A small relative Tikhonov shift is applied
// when the plain factorization breaks down.
struct CholeskyResult {
    std::vector<double> factor; // lower triangular, row-major
    double shift = 0.0;         // ridge actually applied
    bool ok = false;
};

CholeskyResult cholesky(std::span<const double> a, std::size_t n);
void cholesky_solve_inplace(const CholeskyResult& chol, std::size_t n, std::span<double> rhs);

// 2-norm condition number estimate of a symmetric PSD matrix via power
// iteration on A and on A^{-1} (through the factorization).
double condition_estimate(std::span<const double> a, std::size_t n);

// Thomas algorithm; throws TridiagonalSingular on a vanishing pivot.
void tridiagonal_solve(std::span<const double> lower, std::span<const double> diag,
                       std::span<const double> upper, std::span<double> rhs);

} // namespace levybsde
