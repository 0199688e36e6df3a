#include "mfnet/dnn.hpp"

#include <cmath>

#include "mfnet/errors.hpp"
#include "mfnet/numerics.hpp"

namespace mfnet {

void DnnNet::validate() const {
    if (W.size() < 2) throw InvalidArgument("DnnNet: need at least one hidden layer");
    if (widths.size() != W.size() + 1) throw ShapeMismatch("DnnNet: widths must have L + 2 entries");
    if (widths.back() != 1) throw ShapeMismatch("DnnNet: output width must be 1");
    for (std::size_t l = 0; l < W.size(); ++l) {
        if (W[l].rows() != widths[l] || W[l].cols() != widths[l + 1])
            throw ShapeMismatch("DnnNet: layer " + std::to_string(l + 1) + " has the wrong shape");
        if (!W[l].allFinite()) throw InvalidArgument("DnnNet: non-finite weight in layer " + std::to_string(l + 1));
    }
}

DnnNet DnnNet::zeros(Index d, const std::vector<Index>& hidden, const Activation& act) {
    if (d < 1 || hidden.empty()) throw InvalidArgument("DnnNet::zeros: need d >= 1 and a hidden layer");
    DnnNet net;
    net.act = act;
    net.widths.push_back(d);
    for (Index m : hidden) {
        if (m < 1) throw InvalidArgument("DnnNet::zeros: widths must be positive");
        net.widths.push_back(m);
    }
    net.widths.push_back(1);
    for (std::size_t l = 0; l + 1 < net.widths.size(); ++l)
        net.W.push_back(Matrix::Zero(net.widths[l], net.widths[l + 1]));
    return net;
}

FeatureCache dnn_forward(const DnnNet& net, const Dataset& data) {
    const Index L = net.depth();
    if (data.d() != net.input_dim()) throw ShapeMismatch("dnn_forward: input dimension does not match net");

    FeatureCache cache;
    cache.theta.resize(L + 1);
    cache.h_theta.resize(L + 1);
    cache.theta[0] = data.X;
    cache.theta[1] = (data.X * net.W[0]) / static_cast<double>(net.widths[0]);
    cache.h_theta[1] = h_eval(net.act, cache.theta[1]);
    for (Index l = 2; l <= L; ++l) {
        cache.theta[l] = (cache.h_theta[l - 1] * net.W[l - 1]) / static_cast<double>(net.widths[l - 1]);
        cache.h_theta[l] = h_eval(net.act, cache.theta[l]);
    }
    cache.output = (cache.h_theta[L] * net.W[L]).col(0) / static_cast<double>(net.widths[L]);
    return cache;
}

double dnn_loss(const FeatureCache& cache, const Vector& y, const Loss& loss) {
    if (y.size() != cache.output.size()) throw ShapeMismatch("dnn_loss: label count does not match outputs");
    double acc = 0.0;
    for (Index n = 0; n < y.size(); ++n) acc += loss(cache.output(n), y(n));
    return acc / static_cast<double>(y.size());
}

DnnBackward dnn_backward(const DnnNet& net, const FeatureCache& cache, const Vector& y, const Loss& loss) {
    const Index L = net.depth();
    if (static_cast<Index>(cache.theta.size()) != L + 1 || y.size() != cache.output.size())
        throw ShapeMismatch("dnn_backward: cache does not match net and labels");
    const auto N = static_cast<double>(y.size());

    DnnBackward out;
    BackwardCache& bc = out.cache;
    bc.D.resize(L + 1);
    bc.D_out.resize(y.size());
    for (Index n = 0; n < y.size(); ++n) bc.D_out(n) = loss.prime1(cache.output(n), y(n));

    const auto m = [&](Index l) { return static_cast<double>(net.widths[l]); };

    bc.D[L] = ((bc.D_out * net.W[L].transpose()) / m(L)).cwiseProduct(h_prime(net.act, cache.theta[L]));
    for (Index l = L - 1; l >= 1; --l)
        bc.D[l] = ((bc.D[l + 1] * net.W[l].transpose()) / m(l)).cwiseProduct(h_prime(net.act, cache.theta[l]));

    auto& G = out.grads.G;
    G.resize(L + 1);
    G[L] = (cache.h_theta[L].transpose() * bc.D_out) / (N * m(L));
    for (Index l = 1; l < L; ++l) G[l] = (cache.h_theta[l].transpose() * bc.D[l + 1]) / (N * m(l));
    G[0] = (cache.theta[0].transpose() * bc.D[1]) / (N * m(0));
    return out;
}

void scaled_gd_step_inplace(DnnNet& net, const DnnGrads& grads, double eta) {
    if (grads.G.size() != net.W.size()) throw ShapeMismatch("scaled_gd_step: gradient layer count mismatch");
    for (std::size_t l = 0; l < net.W.size(); ++l) {
        if (grads.G[l].rows() != net.W[l].rows() || grads.G[l].cols() != net.W[l].cols())
            throw ShapeMismatch("scaled_gd_step: gradient shape mismatch");
        const double scale = eta * static_cast<double>(net.widths[l]) * static_cast<double>(net.widths[l + 1]);
        net.W[l] -= scale * grads.G[l];
    }
}

DnnNet scaled_gd_step(const DnnNet& net, const DnnGrads& grads, double eta) {
    DnnNet next = net;
    scaled_gd_step_inplace(next, grads, eta);
    return next;
}

double column_spread(const Matrix& features) {
    if (features.cols() < 2) throw DegenerateWidth("feature_spread: need at least two nodes");
    return (features.rowwise().maxCoeff() - features.rowwise().minCoeff()).maxCoeff();
}

double feature_spread(const FeatureCache& cache, Index layer) {
    const auto L = static_cast<Index>(cache.theta.size()) - 1;
    if (layer < 1 || layer > L) throw InvalidArgument("feature_spread: layer out of range");
    return column_spread(cache.theta[layer]);
}

std::size_t default_cadence(std::size_t K) {
    return K <= 1000 ? 1 : (K + 999) / 1000;
}

RunRecord make_record(std::size_t step, double eta, double loss, const DnnNet& net, const FeatureCache& cache) {
    RunRecord r;
    r.step = step;
    r.t = static_cast<double>(step) * eta;
    r.loss = loss;
    for (const auto& W : net.W) r.max_weight.push_back(max_abs(W));
    for (Index l = 1; l <= net.depth(); ++l)
        r.spread.push_back(cache.theta[l].cols() >= 2 ? column_spread(cache.theta[l])
                                                       : std::numeric_limits<double>::quiet_NaN());
    return r;
}

DnnTrainResult train_dnn(const DnnNet& net, const Dataset& data, const Loss& loss, double eta,
                         std::size_t K, const TrainOptions& options) {
    net.validate();
    const std::size_t cadence = options.cadence ? options.cadence : default_cadence(K);

    DnnTrainResult result{net, {}};
    for (std::size_t k = 0;; ++k) {
        const FeatureCache cache = dnn_forward(result.net, data);
        const double value = dnn_loss(cache, data.y, loss);
        if (!std::isfinite(value)) throw NonFiniteLoss(k);
        if (k == K || k % cadence == 0) result.records.push_back(make_record(k, eta, value, result.net, cache));
        if (k == K) break;
        const DnnBackward back = dnn_backward(result.net, cache, data.y, loss);
        scaled_gd_step_inplace(result.net, back.grads, eta);
    }
    return result;
}

} // namespace mfnet
