#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "mfnet/config_io.hpp"
#include "mfnet/dnn.hpp"
#include "mfnet/funcs.hpp"
#include "mfnet/numerics.hpp"
#include "mfnet/resnet.hpp"

namespace mfnet {

inline constexpr Index kDefaultMcSamples = 100000;

// ---------------------------------------------------------------------------
// Gram chains
// ---------------------------------------------------------------------------

/// K[0] = X X^T / d; K[l+1](i,j) = E[h(u) h(v)], (u,v) ~ N(0, sigma1^2 K[l]
/// restricted to {i,j}). Holds K_0..K_{L-1}.
struct GramChain {
    std::vector<Matrix> K;
    double sigma1 = 1.0;
    Activation act;
    int quad_order = kDefaultQuadOrder;
    double lambda_bar = 0.0;  // min over l in [1..L-1] of lambda_min(K_l)
};

GramChain gram_chain(const Dataset& data, double sigma1, const Activation& h, Index L,
                     int quad_order = kDefaultQuadOrder);

/// (1/m) sum_i h(f_i) h(f_i)^T over the columns f_i of an N x m matrix.
Matrix empirical_gram(const Matrix& features, const Activation& h);

/// Monte-Carlo K^beta_1..K^beta_{L-1} of the residual path law. K[0] is the
/// data Gram X X^T / d; std_error[l] holds entrywise standard errors.
struct BetaGramChain {
    std::vector<Matrix> K;
    std::vector<Matrix> std_error;
    Index samples = 0;
    double sigma1 = 1.0;
    Activation h1;
    Activation h2;
    std::uint64_t seed = 0;
};

BetaGramChain mc_beta_gram(const Dataset& data, double sigma1, const Activation& h1, const Activation& h2,
                           Index L, Index samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// DNN initializations and the ideal process
// ---------------------------------------------------------------------------

/// `net` is the returned initialization, `pre_regression` the standard draw
/// it was derived from, `cache` the standard features.
struct DnnInit {
    DnnNet net;
    DnnNet pre_regression;
    FeatureCache cache;
    double sigma1 = 1.0;
    double C3 = 1.0;
    std::uint64_t seed = 0;
};

/// w_1 ~ N(0, d sigma1^2), w_l ~ N(0, m_{l-1} sigma1^2), last layer = C3.
/// Column j of layer l is drawn from stream (l, j, weights).
DnnInit init_dnn_standard(const Dataset& data, const std::vector<Index>& hidden, double sigma1,
                          std::uint64_t seed, const Activation& act, double C3 = 1.0);

/// Standard draw followed by per-node minimum-norm regression of layers
/// 2..L onto the standard features. Throws InverseUnstable when an empirical
/// Gram fails the tolerance.
DnnInit init_dnn_regression(const Dataset& data, const std::vector<Index>& hidden, double sigma1, double C3,
                            std::uint64_t seed, const Activation& act, double rel_tol = kDefaultRelTol);

/// Every weight, output layer included, i.i.d. N(0, sigma^2) regardless of width.
DnnInit init_dnn_fixed_variance(const Dataset& data, const std::vector<Index>& hidden, double sigma,
                                std::uint64_t seed, const Activation& act);

/// theta_bar[l] is N x m_l for l in [1..L] (theta_bar[0] = X); W[l-1] holds
/// the ideal weights of layer l; fallback_used[l] flags resampled layers.
struct IdealDnn {
    std::vector<Matrix> theta_bar;
    std::vector<Matrix> W;
    std::vector<bool> fallback_used;
};

IdealDnn construct_ideal_dnn(const Dataset& data, const DnnInit& actual, const GramChain& chain,
                             double rel_tol = kDefaultRelTol);

/// w_{l+1} = h(theta_bar_l)^T K_l^{-1} theta_bar_{l+1} for l in [1..L-1].
std::vector<Matrix> ideal_dnn_weights(const IdealDnn& ideal, const GramChain& chain, const Activation& act,
                                      double C3, double rel_tol = kDefaultRelTol);

DnnNet ideal_as_net(const IdealDnn& ideal, const DnnNet& shape);

/// Per-category maxima of normalized deviations. `particles` is a diagnostic
/// on the features (DNN) or residuals (Res-Net) and is not part of eps1.
struct Eps1Report {
    double first = 0.0;
    double middle = 0.0;
    double last = 0.0;
    double particles = 0.0;
    double eps1 = 0.0;
    std::vector<double> per_layer;  // one entry per weight layer
};

Eps1Report eps1_audit_dnn(const DnnInit& actual, const IdealDnn& ideal);

// ---------------------------------------------------------------------------
// Res-Net initializations and the ideal process
// ---------------------------------------------------------------------------

struct ResInit {
    ResNet net;
    ResNet pre_regression;
    ResCache cache;
    double sigma1 = 1.0;
    double C5 = 1.0;
    std::uint64_t seed = 0;
};

/// V_1 ~ N(0, d sigma1^2), V_l = 0 for l in [2..L], V_{L+1} = C5.
ResInit init_resnet_zero(const Dataset& data, Index m, Index L, double sigma1, double C5, std::uint64_t seed,
                         const Activation& h1, const Activation& h2);

/// V_1 ~ N(0, d sigma1^2), V_l ~ N(0, m sigma1^2), V_{L+1} = C5.
ResInit init_resnet_standard(const Dataset& data, Index m, Index L, double sigma1, double C5,
                             std::uint64_t seed, const Activation& h1, const Activation& h2);

/// Standard residual draw, then per-node minimum-norm regression of V_l onto
/// the standard residuals.
ResInit init_resnet_regression(const Dataset& data, Index m, Index L, double sigma1, double C5,
                               std::uint64_t seed, const Activation& h1, const Activation& h2,
                               double rel_tol = kDefaultRelTol);

/// Path particles Theta_i = (v_bar_1,i, alpha_bar_2,i, ..., alpha_bar_L,i).
/// alpha_bar[l] for l in [2..L]; beta_bar[l] for l in [1..L]; V[l-1] ideal
/// weights of layer l; path_norm(i) = ||Theta_i||_inf.
struct IdealResNet {
    Matrix v1;
    std::vector<Matrix> alpha_bar;
    std::vector<Matrix> beta_bar;
    std::vector<Matrix> V;
    std::vector<bool> fallback_used;
    Vector path_norm;
};

IdealResNet construct_ideal_resnet(const Dataset& data, const ResInit& actual, const BetaGramChain& chain,
                                   double rel_tol = kDefaultRelTol);

Eps1Report eps1_audit_resnet(const ResInit& actual, const IdealResNet& ideal);

} // namespace mfnet
