#pragma once

#include <vector>

#include "mfnet/config_io.hpp"
#include "mfnet/funcs.hpp"

namespace mfnet {

inline constexpr double kDefaultClamp = 1e-12;
inline constexpr double kDefaultRelTol = 1e-10;
inline constexpr int kDefaultQuadOrder = 64;

struct SymEig {
    Vector eigenvalues;   // descending
    Matrix eigenvectors;  // orthonormal columns
};

/// Symmetrizes (A + A^T)/2 after checking |A - A^T| <= 1e-12 (1 + ||A||_inf)
/// entrywise.
SymEig sym_eig(const Matrix& A);

struct PsdCertificate {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double rel_threshold = 0.0;

    bool invertible() const { return lambda_min >= rel_threshold * lambda_max && lambda_max > 0.0; }
};

PsdCertificate psd_certificate(const Matrix& A, double rel_tol = kDefaultRelTol);

/// Q sqrt(max(Lambda, clamp)) Q^T.
Matrix psd_sqrt(const Matrix& A, double clamp = kDefaultClamp);

/// Q Lambda^{-1/2} Q^T. Throws InverseUnstable if lambda_min < rel_tol lambda_max.
Matrix psd_inv_sqrt(const Matrix& A, double rel_tol = kDefaultRelTol);

/// Q Lambda^{-1} Q^T with the same conditioning guard as psd_inv_sqrt.
Matrix psd_inverse(const Matrix& A, double rel_tol = kDefaultRelTol);

/// Physicists' Gauss-Hermite rule: sum_k w_k f(x_k) ~ int f(x) exp(-x^2) dx.
struct QuadratureRule {
    Vector nodes;
    Vector weights;
};

/// Cached per order; nodes ascending.
const QuadratureRule& gauss_hermite(int order);

/// E[h(u) h(v)] for (u, v) ~ N(0, sigma1^2 [[kii, kij], [kij, kjj]]).
double bivariate_h_expect(double kii, double kij, double kjj, double sigma1, const Activation& h,
                          int quad_order = kDefaultQuadOrder);

/// Minimum-norm w with (1/m) H w = target. H is N x m.
Vector min_norm_solve(const Matrix& H, const Vector& target, Index m, double rel_tol = kDefaultRelTol);

/// Column-wise minimum-norm solve for an N x k block of targets; returns m x k.
Matrix min_norm_solve(const Matrix& H, const Matrix& targets, Index m, double rel_tol = kDefaultRelTol);

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares on (log x, log y).
LogLogFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys);

/// Largest absolute entry.
inline double max_abs(const Matrix& A) { return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff(); }

} // namespace mfnet
