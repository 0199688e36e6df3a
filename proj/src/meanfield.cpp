#include "mfnet/meanfield.hpp"

#include <cmath>

#include "mfnet/errors.hpp"

namespace mfnet {

namespace {

constexpr double kChainPsdFloor = -1e-8;

Matrix data_gram(const Dataset& data) {
    Matrix K0 = (data.X * data.X.transpose()) / static_cast<double>(data.d());
    return 0.5 * (K0 + K0.transpose());
}

// Column j of a rows x cols block is drawn from stream (layer, j, purpose).
Matrix gaussian_block(Index rows, Index cols, double stddev, std::uint64_t seed, Index layer,
                      std::uint64_t purpose_id) {
    Matrix W(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        Rng rng(seed, {static_cast<std::uint64_t>(layer), static_cast<std::uint64_t>(j), purpose_id});
        for (Index i = 0; i < rows; ++i) W(i, j) = stddev * rng.normal();
    }
    return W;
}

Vector col_inf_norms(const Matrix& A) {
    return A.cwiseAbs().colwise().maxCoeff().transpose();
}

// max_{i,j} |A - B|_{ij} / (1 + a_i + b_j)
double normalized_max(const Matrix& A, const Matrix& B, const Vector& a, const Vector& b) {
    double worst = 0.0;
    for (Index j = 0; j < A.cols(); ++j)
        for (Index i = 0; i < A.rows(); ++i)
            worst = std::max(worst, std::abs(A(i, j) - B(i, j)) / (1.0 + a(i) + b(j)));
    return worst;
}

// max_j ||A_j - B_j||_inf / (1 + c_j)
double normalized_column_max(const Matrix& A, const Matrix& B, const Vector& c) {
    const Vector dev = col_inf_norms(A - B);
    double worst = 0.0;
    for (Index j = 0; j < dev.size(); ++j) worst = std::max(worst, dev(j) / (1.0 + c(j)));
    return worst;
}

// Maps samples of N(0, sigma1^2 K_hat) to N(0, sigma1^2 K) through
// K^{1/2} K_hat^{-1/2}; returns false (leaving `out` untouched) when K_hat is
// too ill-conditioned.
bool couple_to_law(const Matrix& K, const Matrix& K_hat, const Matrix& samples, double rel_tol, Matrix& out) {
    try {
        const Matrix T = psd_sqrt(K) * psd_inv_sqrt(K_hat, rel_tol);
        out = T * samples;
        return true;
    } catch (const InverseUnstable&) {
        return false;
    }
}

Matrix resample_law(const Matrix& K, double sigma1, Index cols, std::uint64_t seed, Index layer) {
    const Matrix Z = gaussian_block(K.rows(), cols, 1.0, seed, layer, purpose::fallback);
    return sigma1 * psd_sqrt(K) * Z;
}

} // namespace

// ---------------------------------------------------------------------------
// Gram chains

Matrix empirical_gram(const Matrix& features, const Activation& h) {
    if (features.cols() < 1) throw InvalidArgument("empirical_gram: need at least one node");
    const Matrix H = h_eval(h, features);
    Matrix K = (H * H.transpose()) / static_cast<double>(features.cols());
    return 0.5 * (K + K.transpose());
}

GramChain gram_chain(const Dataset& data, double sigma1, const Activation& h, Index L, int quad_order) {
    if (!(sigma1 > 0.0)) throw InvalidArgument("gram_chain: sigma1 must be > 0");
    if (L < 2) throw InvalidArgument("gram_chain: need L >= 2");

    GramChain chain;
    chain.sigma1 = sigma1;
    chain.act = h;
    chain.quad_order = quad_order;
    chain.K.push_back(data_gram(data));
    chain.lambda_bar = std::numeric_limits<double>::infinity();

    const Index N = data.n();
    for (Index l = 1; l < L; ++l) {
        const Matrix& prev = chain.K.back();
        Matrix next(N, N);
        for (Index i = 0; i < N; ++i)
            for (Index j = i; j < N; ++j) {
                next(i, j) = bivariate_h_expect(prev(i, i), prev(i, j), prev(j, j), sigma1, h, quad_order);
                next(j, i) = next(i, j);
            }
        const double lmin = psd_certificate(next).lambda_min;
        if (lmin < kChainPsdFloor) throw NotPsd("gram_chain: K_" + std::to_string(l) + " is not PSD");
        chain.lambda_bar = std::min(chain.lambda_bar, lmin);
        chain.K.push_back(std::move(next));
    }
    return chain;
}

BetaGramChain mc_beta_gram(const Dataset& data, double sigma1, const Activation& h1, const Activation& h2,
                           Index L, Index samples, std::uint64_t seed) {
    if (samples < 1000) throw InvalidArgument("mc_beta_gram: need at least 1000 samples");
    if (L < 1) throw InvalidArgument("mc_beta_gram: need L >= 1");
    if (!(sigma1 > 0.0)) throw InvalidArgument("mc_beta_gram: sigma1 must be > 0");

    const Index N = data.n();
    const Index d = data.d();
    const auto M = static_cast<double>(samples);

    BetaGramChain chain;
    chain.samples = samples;
    chain.sigma1 = sigma1;
    chain.h1 = h1;
    chain.h2 = h2;
    chain.seed = seed;
    chain.K.push_back(data_gram(data));
    chain.std_error.push_back(Matrix::Zero(N, N));

    // Rows are path samples: beta_1 = X v_1 / d with v_1 ~ N(0, d sigma1^2 I).
    Matrix beta(samples, N);
    const double v_std = std::sqrt(static_cast<double>(d)) * sigma1;
    Vector v(d);
    for (Index s = 0; s < samples; ++s) {
        Rng rng(seed, {1, static_cast<std::uint64_t>(s), purpose::mc_gram});
        for (Index k = 0; k < d; ++k) v(k) = v_std * rng.normal();
        beta.row(s) = (data.X * v).transpose() / static_cast<double>(d);
    }

    Vector z(N);
    for (Index l = 1; l < L; ++l) {
        const Matrix H = h_eval(h1, beta);
        Matrix K = (H.transpose() * H) / M;
        K = 0.5 * (K + K.transpose()).eval();
        const Matrix H2 = H.cwiseAbs2();
        const Matrix second = (H2.transpose() * H2) / M;
        const Matrix var = (second - K.cwiseAbs2()).cwiseMax(0.0);
        if (psd_certificate(K).lambda_min < kChainPsdFloor)
            throw NotPsd("mc_beta_gram: K_" + std::to_string(l) + " is not PSD");
        chain.std_error.push_back((var / M).cwiseSqrt());

        // alpha_{l+1} ~ N(0, sigma1^2 K), beta_{l+1} = beta_l + h2(alpha_{l+1}).
        const Matrix R = sigma1 * psd_sqrt(K);
        for (Index s = 0; s < samples; ++s) {
            Rng rng(seed, {static_cast<std::uint64_t>(l + 1), static_cast<std::uint64_t>(s), purpose::mc_gram});
            for (Index k = 0; k < N; ++k) z(k) = rng.normal();
            const Vector alpha = R * z;
            for (Index k = 0; k < N; ++k) beta(s, k) += h2(alpha(k));
        }
        chain.K.push_back(std::move(K));
    }
    return chain;
}

// ---------------------------------------------------------------------------
// DNN initializations

DnnInit init_dnn_standard(const Dataset& data, const std::vector<Index>& hidden, double sigma1,
                          std::uint64_t seed, const Activation& act, double C3) {
    if (!(sigma1 > 0.0)) throw InvalidArgument("init_dnn_standard: sigma1 must be > 0");
    DnnNet net = DnnNet::zeros(data.d(), hidden, act);
    const Index L = net.depth();
    for (Index l = 1; l <= L; ++l) {
        const double fan_in = static_cast<double>(net.widths[l - 1]);
        net.W[l - 1] = gaussian_block(net.widths[l - 1], net.widths[l], std::sqrt(fan_in) * sigma1, seed, l,
                                      purpose::weights);
    }
    net.W[L].setConstant(C3);

    DnnInit init;
    init.cache = dnn_forward(net, data);
    init.pre_regression = net;
    init.net = std::move(net);
    init.sigma1 = sigma1;
    init.C3 = C3;
    init.seed = seed;
    return init;
}

DnnInit init_dnn_regression(const Dataset& data, const std::vector<Index>& hidden, double sigma1, double C3,
                            std::uint64_t seed, const Activation& act, double rel_tol) {
    DnnInit init = init_dnn_standard(data, hidden, sigma1, seed, act, C3);
    const Index L = init.net.depth();
    for (Index l = 2; l <= L; ++l)
        init.net.W[l - 1] = min_norm_solve(init.cache.h_theta[l - 1], init.cache.theta[l], init.net.widths[l - 1],
                                           rel_tol);
    return init;
}

DnnInit init_dnn_fixed_variance(const Dataset& data, const std::vector<Index>& hidden, double sigma,
                                std::uint64_t seed, const Activation& act) {
    if (!(sigma > 0.0)) throw InvalidArgument("init_dnn_fixed_variance: sigma must be > 0");
    DnnNet net = DnnNet::zeros(data.d(), hidden, act);
    for (Index l = 1; l <= net.depth() + 1; ++l)
        net.W[l - 1] = gaussian_block(net.widths[l - 1], net.widths[l], sigma, seed, l, purpose::weights);

    DnnInit init;
    init.cache = dnn_forward(net, data);
    init.pre_regression = net;
    init.net = std::move(net);
    init.sigma1 = sigma;
    init.C3 = std::numeric_limits<double>::quiet_NaN();
    init.seed = seed;
    return init;
}

// ---------------------------------------------------------------------------
// Ideal DNN

IdealDnn construct_ideal_dnn(const Dataset& data, const DnnInit& actual, const GramChain& chain, double rel_tol) {
    const DnnNet& net = actual.net;
    const Index L = net.depth();
    if (static_cast<Index>(chain.K.size()) < L) throw ShapeMismatch("construct_ideal_dnn: chain shorter than net");
    if (data.n() != chain.K[0].rows()) throw ShapeMismatch("construct_ideal_dnn: chain built on other data");

    IdealDnn ideal;
    ideal.theta_bar.resize(L + 1);
    ideal.fallback_used.assign(L + 1, false);
    ideal.theta_bar[0] = data.X;
    // The first layer is shared: w_bar_1 := w_hat_1, hence theta_bar_1 = theta_hat_1.
    ideal.theta_bar[1] = actual.cache.theta[1];

    for (Index l = 1; l < L; ++l) {
        const Matrix K_hat = empirical_gram(actual.cache.theta[l], net.act);
        if (!couple_to_law(chain.K[l], K_hat, actual.cache.theta[l + 1], rel_tol, ideal.theta_bar[l + 1])) {
            ideal.theta_bar[l + 1] = resample_law(chain.K[l], chain.sigma1, net.widths[l + 1], actual.seed, l + 1);
            ideal.fallback_used[l + 1] = true;
        }
    }
    ideal.W = ideal_dnn_weights(ideal, chain, net.act, actual.C3, rel_tol);
    ideal.W[0] = actual.pre_regression.W[0];
    return ideal;
}

std::vector<Matrix> ideal_dnn_weights(const IdealDnn& ideal, const GramChain& chain, const Activation& act,
                                      double C3, double rel_tol) {
    const auto L = static_cast<Index>(ideal.theta_bar.size()) - 1;
    std::vector<Matrix> W(L + 1);
    // Layer 1 has no closed form; callers store w_bar_1 separately.
    W[0] = Matrix();
    for (Index l = 1; l < L; ++l) {
        const Matrix K_inv = psd_inverse(chain.K[l], rel_tol);
        W[l] = h_eval(act, ideal.theta_bar[l]).transpose() * (K_inv * ideal.theta_bar[l + 1]);
    }
    W[L] = Matrix::Constant(ideal.theta_bar[L].cols(), 1, C3);
    return W;
}

DnnNet ideal_as_net(const IdealDnn& ideal, const DnnNet& shape) {
    DnnNet net = shape;
    net.W = ideal.W;
    net.validate();
    return net;
}

Eps1Report eps1_audit_dnn(const DnnInit& actual, const IdealDnn& ideal) {
    const DnnNet& net = actual.net;
    const Index L = net.depth();
    if (static_cast<Index>(ideal.W.size()) != L + 1 || static_cast<Index>(ideal.theta_bar.size()) != L + 1)
        throw ShapeMismatch("eps1_audit_dnn: ideal does not match net");
    for (Index l = 0; l <= L; ++l)
        if (ideal.W[l].rows() != net.W[l].rows() || ideal.W[l].cols() != net.W[l].cols())
            throw ShapeMismatch("eps1_audit_dnn: ideal weight shape mismatch");

    Eps1Report r;
    r.per_layer.assign(L + 1, 0.0);

    const Vector w1_norm = col_inf_norms(ideal.W[0]);
    r.per_layer[0] = normalized_column_max(net.W[0], ideal.W[0], w1_norm);
    r.first = r.per_layer[0];

    for (Index l = 1; l < L; ++l) {
        // Weights of layer l+1 join node i of layer l to node j of layer l+1.
        const Vector left = l == 1 ? w1_norm : col_inf_norms(ideal.theta_bar[l]);
        const Vector right = col_inf_norms(ideal.theta_bar[l + 1]);
        r.per_layer[l] = normalized_max(net.W[l], ideal.W[l], left, right);
        r.middle = std::max(r.middle, r.per_layer[l]);
    }

    const Vector top = col_inf_norms(ideal.theta_bar[L]);
    r.per_layer[L] = normalized_max(net.W[L], ideal.W[L], top, Vector::Zero(1));
    r.last = r.per_layer[L];

    for (Index l = 2; l <= L; ++l)
        r.particles = std::max(r.particles, normalized_column_max(actual.cache.theta[l], ideal.theta_bar[l],
                                                                  col_inf_norms(ideal.theta_bar[l])));

    r.eps1 = std::max({r.first, r.middle, r.last});
    return r;
}

// ---------------------------------------------------------------------------
// Res-Net initializations

ResInit init_resnet_zero(const Dataset& data, Index m, Index L, double sigma1, double C5, std::uint64_t seed,
                         const Activation& h1, const Activation& h2) {
    if (!(sigma1 > 0.0)) throw InvalidArgument("init_resnet_zero: sigma1 must be > 0");
    ResNet net = ResNet::zeros(data.d(), m, L, h1, h2);
    net.V[0] = gaussian_block(data.d(), m, std::sqrt(static_cast<double>(data.d())) * sigma1, seed, 1,
                              purpose::weights);
    net.V[L].setConstant(C5);

    ResInit init;
    init.cache = resnet_forward(net, data);
    init.pre_regression = net;
    init.net = std::move(net);
    init.sigma1 = sigma1;
    init.C5 = C5;
    init.seed = seed;
    return init;
}

ResInit init_resnet_standard(const Dataset& data, Index m, Index L, double sigma1, double C5,
                             std::uint64_t seed, const Activation& h1, const Activation& h2) {
    ResInit init = init_resnet_zero(data, m, L, sigma1, C5, seed, h1, h2);
    const double stddev = std::sqrt(static_cast<double>(m)) * sigma1;
    for (Index l = 2; l <= L; ++l) init.net.V[l - 1] = gaussian_block(m, m, stddev, seed, l, purpose::weights);
    init.cache = resnet_forward(init.net, data);
    init.pre_regression = init.net;
    return init;
}

ResInit init_resnet_regression(const Dataset& data, Index m, Index L, double sigma1, double C5,
                               std::uint64_t seed, const Activation& h1, const Activation& h2, double rel_tol) {
    ResInit init = init_resnet_standard(data, m, L, sigma1, C5, seed, h1, h2);
    for (Index l = 2; l <= L; ++l)
        init.net.V[l - 1] = min_norm_solve(init.cache.h1_beta[l - 1], init.cache.alpha[l], m, rel_tol);
    return init;
}

// ---------------------------------------------------------------------------
// Ideal Res-Net

IdealResNet construct_ideal_resnet(const Dataset& data, const ResInit& actual, const BetaGramChain& chain,
                                   double rel_tol) {
    const ResNet& net = actual.net;
    const Index L = net.depth();
    const Index m = net.m;
    if (static_cast<Index>(chain.K.size()) < L) throw ShapeMismatch("construct_ideal_resnet: chain shorter than net");
    if (data.n() != chain.K[0].rows()) throw ShapeMismatch("construct_ideal_resnet: chain built on other data");

    IdealResNet ideal;
    ideal.v1 = actual.pre_regression.V[0];
    ideal.alpha_bar.resize(L + 1);
    ideal.beta_bar.resize(L + 1);
    ideal.V.resize(L + 1);
    ideal.fallback_used.assign(L + 1, false);
    ideal.beta_bar[0] = data.X;
    ideal.beta_bar[1] = actual.cache.beta[1];
    ideal.V[0] = ideal.v1;

    for (Index l = 1; l < L; ++l) {
        const Matrix K_hat = empirical_gram(actual.cache.beta[l], net.h1);
        if (!couple_to_law(chain.K[l], K_hat, actual.cache.alpha[l + 1], rel_tol, ideal.alpha_bar[l + 1])) {
            ideal.alpha_bar[l + 1] = resample_law(chain.K[l], chain.sigma1, m, actual.seed, l + 1);
            ideal.fallback_used[l + 1] = true;
        }
        ideal.beta_bar[l + 1] = ideal.beta_bar[l] + h_eval(net.h2, ideal.alpha_bar[l + 1]);
        const Matrix K_inv = psd_inverse(chain.K[l], rel_tol);
        ideal.V[l] = h_eval(net.h1, ideal.beta_bar[l]).transpose() * (K_inv * ideal.alpha_bar[l + 1]);
    }
    ideal.V[L] = Matrix::Constant(m, 1, actual.C5);

    ideal.path_norm = col_inf_norms(ideal.v1);
    for (Index l = 2; l <= L; ++l) ideal.path_norm = ideal.path_norm.cwiseMax(col_inf_norms(ideal.alpha_bar[l]));
    return ideal;
}

Eps1Report eps1_audit_resnet(const ResInit& actual, const IdealResNet& ideal) {
    const ResNet& net = actual.net;
    const Index L = net.depth();
    if (static_cast<Index>(ideal.V.size()) != L + 1 || ideal.path_norm.size() != net.m)
        throw ShapeMismatch("eps1_audit_resnet: ideal does not match net");
    for (Index l = 0; l <= L; ++l)
        if (ideal.V[l].rows() != net.V[l].rows() || ideal.V[l].cols() != net.V[l].cols())
            throw ShapeMismatch("eps1_audit_resnet: ideal weight shape mismatch");

    const Vector& p = ideal.path_norm;
    Eps1Report r;
    r.per_layer.assign(L + 1, 0.0);
    r.per_layer[0] = normalized_column_max(net.V[0], ideal.V[0], p);
    r.first = r.per_layer[0];
    for (Index l = 1; l < L; ++l) {
        r.per_layer[l] = normalized_max(net.V[l], ideal.V[l], p, p);
        r.middle = std::max(r.middle, r.per_layer[l]);
    }
    r.per_layer[L] = normalized_max(net.V[L], ideal.V[L], p, Vector::Zero(1));
    r.last = r.per_layer[L];

    for (Index l = 2; l <= L; ++l)
        r.particles = std::max(r.particles, normalized_column_max(actual.cache.alpha[l], ideal.alpha_bar[l], p));

    r.eps1 = std::max({r.first, r.middle, r.last});
    return r;
}

} // namespace mfnet
