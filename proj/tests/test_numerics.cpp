#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mfnet/errors.hpp"
#include "mfnet/numerics.hpp"
#include "oracles.hpp"

using namespace mfnet;

namespace {

Matrix random_psd(Index n, std::uint64_t seed) {
    const Matrix B = oracle::random_matrix(n, n, seed);
    return B * B.transpose();
}

} // namespace

TEST_CASE("sym_eig reconstructs its input with orthonormal vectors in descending order") {
    const Matrix A = random_psd(6, 1) - 2.0 * Matrix::Identity(6, 6);
    const SymEig e = sym_eig(A);
    const Matrix back = e.eigenvectors * e.eigenvalues.asDiagonal() * e.eigenvectors.transpose();
    CHECK(oracle::inf_norm(back - A) <= 1e-10 * (1.0 + oracle::inf_norm(A)));
    CHECK(oracle::inf_norm(e.eigenvectors.transpose() * e.eigenvectors - Matrix::Identity(6, 6)) <= 1e-10);
    for (Index i = 1; i < 6; ++i) CHECK(e.eigenvalues(i - 1) >= e.eigenvalues(i));
}

TEST_CASE("sym_eig refuses clearly asymmetric input") {
    Matrix A = Matrix::Identity(3, 3);
    A(0, 1) = 1e-3;
    CHECK_THROWS_AS(sym_eig(A), NotSymmetric);
}

TEST_CASE("psd_sqrt on identity, diagonal and random input") {
    CHECK(oracle::inf_norm(psd_sqrt(Matrix::Identity(4, 4), 0.0) - Matrix::Identity(4, 4)) < 1e-14);
    Matrix D = Matrix::Zero(2, 2);
    D.diagonal() << 4.0, 9.0;
    Matrix expect = Matrix::Zero(2, 2);
    expect.diagonal() << 2.0, 3.0;
    CHECK(oracle::inf_norm(psd_sqrt(D) - expect) < 1e-14);
    const Matrix A = random_psd(5, 3);
    const Matrix S = psd_sqrt(A);
    CHECK(oracle::inf_norm(S * S - A) < 1e-8);
}

TEST_CASE("psd_inv_sqrt on identity and diagonal input") {
    CHECK(oracle::inf_norm(psd_inv_sqrt(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)) < 1e-14);
    Matrix D = Matrix::Zero(2, 2);
    D.diagonal() << 4.0, 9.0;
    Matrix expect = Matrix::Zero(2, 2);
    expect.diagonal() << 0.5, 1.0 / 3.0;
    CHECK(oracle::inf_norm(psd_inv_sqrt(D) - expect) < 1e-14);
    const Matrix A = random_psd(4, 8);
    CHECK(oracle::inf_norm(psd_inverse(A) * A - Matrix::Identity(4, 4)) < 1e-8);
}

TEST_CASE("inverse roots refuse ill-conditioned input") {
    Matrix D = Matrix::Zero(2, 2);
    D.diagonal() << 1.0, 1e-14;
    CHECK_THROWS_AS(psd_inv_sqrt(D, 1e-10), InverseUnstable);
    CHECK_THROWS_AS(psd_inverse(D, 1e-10), InverseUnstable);
    try {
        psd_inv_sqrt(D, 1e-10);
    } catch (const InverseUnstable& e) {
        CHECK(e.lambda_min() == doctest::Approx(1e-14));
        CHECK(e.lambda_max() == doctest::Approx(1.0));
    }
    CHECK_FALSE(psd_certificate(D).invertible());
    CHECK(psd_certificate(Matrix::Identity(2, 2)).invertible());
}

TEST_CASE("Gauss-Hermite rule integrates low-order moments exactly") {
    const QuadratureRule& rule = gauss_hermite(32);
    const double sqrt_pi = std::sqrt(std::numbers::pi);
    CHECK(rule.weights.sum() == doctest::Approx(sqrt_pi).epsilon(1e-13));
    CHECK(rule.weights.dot(rule.nodes.array().square().matrix()) == doctest::Approx(sqrt_pi / 2).epsilon(1e-13));
    CHECK(rule.weights.dot(rule.nodes.array().pow(4).matrix()) == doctest::Approx(3 * sqrt_pi / 4).epsilon(1e-12));
    for (Index i = 1; i < rule.nodes.size(); ++i) CHECK(rule.nodes(i - 1) < rule.nodes(i));
    CHECK(&gauss_hermite(32) == &rule);
}

TEST_CASE("bivariate expectation of tanh vanishes for independent coordinates") {
    CHECK(std::abs(bivariate_h_expect(1.0, 0.0, 1.0, 1.0, Activation::tanh())) < 1e-14);
}

TEST_CASE("bivariate expectation of the identity is the covariance") {
    for (auto [kii, kij, kjj, s] : {std::tuple{1.0, 0.3, 2.0, 1.0}, std::tuple{0.5, -0.2, 0.4, 1.7},
                                    std::tuple{1.0, 1.0, 1.0, 0.5}}) {
        CHECK(bivariate_h_expect(kii, kij, kjj, s, Activation::identity()) ==
              doctest::Approx(s * s * kij).epsilon(1e-12));
    }
}

TEST_CASE("bivariate expectation on a rank-one covariance matches Monte Carlo") {
    std::mt19937_64 gen(2024);
    std::normal_distribution<double> normal;
    constexpr int n = 10000000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = std::tanh(normal(gen));
        sum += t * t;
        sum_sq += t * t * t * t;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    const double value = bivariate_h_expect(1.0, 1.0, 1.0, 1.0, Activation::tanh());
    CHECK(std::abs(value - mean) < 3.0 * se);
}

TEST_CASE("bivariate expectation rejects an indefinite covariance") {
    CHECK_THROWS_AS(bivariate_h_expect(1.0, 2.0, 1.0, 1.0, Activation::tanh()), NotPsd);
}

TEST_CASE("min_norm_solve on the identity scales the target") {
    Vector theta(4);
    theta << 0.1, -0.3, 0.7, 2.0;
    CHECK(oracle::inf_norm(min_norm_solve(Matrix::Identity(4, 4), theta, 4) - 4.0 * theta) < 1e-12);
    CHECK(oracle::inf_norm(min_norm_solve(Matrix::Identity(4, 4), Vector(Vector::Zero(4)), 4)) == 0.0);
}

TEST_CASE("min_norm_solve matches the pseudo-inverse") {
    const Matrix H = oracle::random_matrix(4, 12, 5);
    const Vector target = oracle::random_matrix(4, 1, 6).col(0);
    const Vector w = min_norm_solve(H, target, 12);
    CHECK(oracle::inf_norm(w - oracle::pinv_min_norm(H, target, 12)) < 1e-8);
    CHECK(oracle::inf_norm(H * w / 12.0 - target) < 1e-10);

    const Matrix targets = oracle::random_matrix(4, 3, 7);
    const Matrix W = min_norm_solve(H, targets, 12);
    for (Index j = 0; j < 3; ++j)
        CHECK(oracle::inf_norm(W.col(j) - oracle::pinv_min_norm(H, targets.col(j), 12)) < 1e-8);
}

TEST_CASE("min_norm_solve refuses rank-deficient systems") {
    Matrix H = oracle::random_matrix(3, 8, 9);
    H.row(2) = H.row(1);
    CHECK_THROWS_AS(min_norm_solve(H, Vector(Vector::Ones(3)), 8), InverseUnstable);
}

TEST_CASE("log-log fit recovers exact power laws") {
    const std::vector<double> xs{1, 2, 4, 8, 16};
    std::vector<double> inv, flat;
    for (double x : xs) {
        inv.push_back(1.0 / x);
        flat.push_back(3.0);
    }
    CHECK(std::abs(fit_loglog_slope(xs, inv).slope + 1.0) < 1e-12);
    CHECK(std::abs(fit_loglog_slope(xs, flat).slope) < 1e-12);
    CHECK(fit_loglog_slope(xs, flat).intercept == doctest::Approx(std::log(3.0)));
}

TEST_CASE("log-log fit of a noisy inverse square root stays near minus one half") {
    std::mt19937_64 gen(17);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<double> xs, ys;
    for (double x = 64; x <= 2048; x *= 2) {
        xs.push_back(x);
        ys.push_back(2.0 / std::sqrt(x) * (1.0 + noise(gen)));
    }
    const double slope = fit_loglog_slope(xs, ys).slope;
    CHECK(slope >= -0.6);
    CHECK(slope <= -0.4);
}

TEST_CASE("log-log fit rejects degenerate input") {
    CHECK_THROWS_AS(fit_loglog_slope({1, 2}, {1, 2}), DegenerateFit);
    CHECK_THROWS_AS(fit_loglog_slope({2, 2, 2}, {1, 2, 3}), DegenerateFit);
    CHECK_THROWS_AS(fit_loglog_slope({1, 2, 3}, {1, 0, 3}), InvalidArgument);
    CHECK_THROWS_AS(fit_loglog_slope({1, 2, 3}, {1, 2}), InvalidArgument);
}
