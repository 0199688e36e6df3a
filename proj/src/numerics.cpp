#include "mfnet/numerics.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "mfnet/errors.hpp"

namespace mfnet {

namespace {

void require_square(const Matrix& A, const char* who) {
    if (A.rows() != A.cols()) throw ShapeMismatch(std::string(who) + ": matrix must be square");
}

void require_invertible(const SymEig& eig, double rel_tol, const char* who) {
    const double lmax = eig.eigenvalues(0);
    const double lmin = eig.eigenvalues(eig.eigenvalues.size() - 1);
    if (!(lmax > 0.0) || lmin < rel_tol * lmax)
        throw InverseUnstable(std::string(who) + ": matrix too ill-conditioned to invert", lmin, lmax);
}

Matrix spectral_map(const SymEig& eig, const Vector& diag) {
    return eig.eigenvectors * diag.asDiagonal() * eig.eigenvectors.transpose();
}

} // namespace

SymEig sym_eig(const Matrix& A) {
    require_square(A, "sym_eig");
    if (A.size() == 0) return {};
    const double scale = 1.0 + max_abs(A);
    if (max_abs(A - A.transpose()) > 1e-12 * scale) throw NotSymmetric("sym_eig: input not symmetric");
    const Matrix S = 0.5 * (A + A.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> solver(S);
    if (solver.info() != Eigen::Success) throw Error("sym_eig: eigen decomposition failed");

    // Eigen returns ascending order; flip to descending.
    SymEig out;
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors = solver.eigenvectors().rowwise().reverse();
    return out;
}

PsdCertificate psd_certificate(const Matrix& A, double rel_tol) {
    const SymEig eig = sym_eig(A);
    PsdCertificate c;
    c.lambda_max = eig.eigenvalues(0);
    c.lambda_min = eig.eigenvalues(eig.eigenvalues.size() - 1);
    c.rel_threshold = rel_tol;
    return c;
}

Matrix psd_sqrt(const Matrix& A, double clamp) {
    const SymEig eig = sym_eig(A);
    const Vector root = eig.eigenvalues.cwiseMax(clamp).cwiseSqrt();
    const Matrix S = spectral_map(eig, root);
    return 0.5 * (S + S.transpose());
}

Matrix psd_inv_sqrt(const Matrix& A, double rel_tol) {
    const SymEig eig = sym_eig(A);
    require_invertible(eig, rel_tol, "psd_inv_sqrt");
    const Vector inv_root = eig.eigenvalues.cwiseSqrt().cwiseInverse();
    const Matrix S = spectral_map(eig, inv_root);
    return 0.5 * (S + S.transpose());
}

Matrix psd_inverse(const Matrix& A, double rel_tol) {
    const SymEig eig = sym_eig(A);
    require_invertible(eig, rel_tol, "psd_inverse");
    const Matrix S = spectral_map(eig, eig.eigenvalues.cwiseInverse());
    return 0.5 * (S + S.transpose());
}

const QuadratureRule& gauss_hermite(int order) {
    if (order < 1) throw InvalidArgument("gauss_hermite: order must be >= 1");
    static std::mutex mutex;
    static std::map<int, QuadratureRule> cache;
    std::lock_guard lock(mutex);
    if (auto it = cache.find(order); it != cache.end()) return it->second;

    // Golub-Welsch: eigenpairs of the symmetric Jacobi matrix of the Hermite
    // recurrence give nodes and (through the first eigenvector components)
    // weights.
    Matrix J = Matrix::Zero(order, order);
    for (int k = 1; k < order; ++k) {
        const double b = std::sqrt(0.5 * k);
        J(k - 1, k) = b;
        J(k, k - 1) = b;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(J);
    QuadratureRule rule;
    rule.nodes = solver.eigenvalues();
    rule.weights = std::sqrt(std::numbers::pi) * solver.eigenvectors().row(0).transpose().cwiseAbs2();
    return cache.emplace(order, std::move(rule)).first->second;
}

double bivariate_h_expect(double kii, double kij, double kjj, double sigma1, const Activation& h,
                          int quad_order) {
    if (!(sigma1 > 0.0)) throw InvalidArgument("bivariate_h_expect: sigma1 must be > 0");

    const double trace = kii + kjj;
    const double half_gap = std::sqrt(0.25 * (kii - kjj) * (kii - kjj) + kij * kij);
    const double lmin = 0.5 * trace - half_gap;
    const double lmax = 0.5 * trace + half_gap;
    if (lmin < -1e-10) throw NotPsd("bivariate_h_expect: covariance is indefinite");

    const QuadratureRule& rule = gauss_hermite(quad_order);
    const Vector& x = rule.nodes;
    const Vector& w = rule.weights;
    const double s = sigma1 * std::numbers::sqrt2;

    if (lmax <= 0.0) return h(0.0) * h(0.0);

    const double det = kii * kjj - kij * kij;
    if (det < 1e-12 * trace * trace) {
        // Rank-one covariance: (u, v) = sqrt(lmax) q z with q the leading
        // eigenvector.
        double q1 = kij;
        double q2 = lmax - kii;
        if (std::abs(q1) + std::abs(q2) < 1e-300) {
            q1 = kii >= kjj ? 1.0 : 0.0;
            q2 = kii >= kjj ? 0.0 : 1.0;
        }
        const double qn = std::hypot(q1, q2);
        const double r = s * std::sqrt(lmax);
        const double a = r * q1 / qn;
        const double b = r * q2 / qn;
        double acc = 0.0;
        for (Index k = 0; k < x.size(); ++k) acc += w(k) * h(a * x(k)) * h(b * x(k));
        return acc / std::sqrt(std::numbers::pi);
    }

    // Cholesky factor [[a, 0], [b, c]] of the covariance.
    const double a = std::sqrt(kii);
    const double b = kij / a;
    const double c = std::sqrt(std::max(kjj - b * b, 0.0));

    double acc = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        const double hu = h(s * a * x(i));
        double inner = 0.0;
        for (Index j = 0; j < x.size(); ++j) inner += w(j) * h(s * (b * x(i) + c * x(j)));
        acc += w(i) * hu * inner;
    }
    return acc / std::numbers::pi;
}

Matrix min_norm_solve(const Matrix& H, const Matrix& targets, Index m, double rel_tol) {
    if (m < 1) throw InvalidArgument("min_norm_solve: m must be >= 1");
    if (H.cols() != m) throw ShapeMismatch("min_norm_solve: H must have m columns");
    if (targets.rows() != H.rows()) throw ShapeMismatch("min_norm_solve: target length must equal rows of H");

    Matrix K = (H * H.transpose()) / static_cast<double>(m);
    K = 0.5 * (K + K.transpose()).eval();
    const SymEig eig = sym_eig(K);
    require_invertible(eig, rel_tol, "min_norm_solve");

    const Eigen::LLT<Matrix> llt(K);
    Matrix z;
    if (llt.info() == Eigen::Success) {
        z = llt.solve(targets);
    } else {
        z = spectral_map(eig, eig.eigenvalues.cwiseInverse()) * targets;
    }
    return H.transpose() * z;
}

Vector min_norm_solve(const Matrix& H, const Vector& target, Index m, double rel_tol) {
    const Matrix t = target;
    return min_norm_solve(H, t, m, rel_tol).col(0);
}

LogLogFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw InvalidArgument("fit_loglog_slope: xs and ys differ in length");
    if (xs.size() < 3) throw DegenerateFit("fit_loglog_slope: need at least 3 points");
    for (std::size_t k = 0; k < xs.size(); ++k)
        if (!(xs[k] > 0.0) || !(ys[k] > 0.0) || !std::isfinite(xs[k]) || !std::isfinite(ys[k]))
            throw InvalidArgument("fit_loglog_slope: all values must be positive and finite");

    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        mx += std::log(xs[k]);
        my += std::log(ys[k]);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double dx = std::log(xs[k]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(ys[k]) - my);
    }
    if (sxx <= 0.0) throw DegenerateFit("fit_loglog_slope: all xs equal");
    LogLogFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

} // namespace mfnet
