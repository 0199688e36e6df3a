#include "mfnet/resnet.hpp"

#include <cmath>

#include "mfnet/errors.hpp"
#include "mfnet/numerics.hpp"

namespace mfnet {

void ResNet::validate() const {
    if (V.size() < 2) throw InvalidArgument("ResNet: need at least one hidden layer");
    if (d < 1 || m < 1) throw InvalidArgument("ResNet: d and m must be positive");
    const Index L = depth();
    for (Index l = 0; l <= L; ++l) {
        const Index rows = l == 0 ? d : m;
        const Index cols = l == L ? 1 : m;
        if (V[l].rows() != rows || V[l].cols() != cols)
            throw ShapeMismatch("ResNet: layer " + std::to_string(l + 1) + " has the wrong shape");
        if (!V[l].allFinite()) throw InvalidArgument("ResNet: non-finite weight in layer " + std::to_string(l + 1));
    }
}

ResNet ResNet::zeros(Index d, Index m, Index L, const Activation& h1, const Activation& h2) {
    if (d < 1 || m < 1 || L < 1) throw InvalidArgument("ResNet::zeros: need d, m, L >= 1");
    ResNet net;
    net.d = d;
    net.m = m;
    net.h1 = h1;
    net.h2 = h2;
    net.V.push_back(Matrix::Zero(d, m));
    for (Index l = 2; l <= L; ++l) net.V.push_back(Matrix::Zero(m, m));
    net.V.push_back(Matrix::Zero(m, 1));
    return net;
}

ResCache resnet_forward(const ResNet& net, const Dataset& data) {
    if (data.d() != net.d) throw ShapeMismatch("resnet_forward: input dimension does not match net");
    const Index L = net.depth();
    const auto m = static_cast<double>(net.m);

    ResCache c;
    c.beta.resize(L + 1);
    c.alpha.resize(L + 1);
    c.h1_beta.resize(L + 1);
    c.beta[0] = data.X;
    c.beta[1] = (data.X * net.V[0]) / static_cast<double>(net.d);
    c.h1_beta[1] = h_eval(net.h1, c.beta[1]);
    for (Index l = 2; l <= L; ++l) {
        c.alpha[l] = (c.h1_beta[l - 1] * net.V[l - 1]) / m;
        c.beta[l] = h_eval(net.h2, c.alpha[l]) + c.beta[l - 1];
        c.h1_beta[l] = h_eval(net.h1, c.beta[l]);
    }
    c.output = (c.h1_beta[L] * net.V[L]).col(0) / m;
    return c;
}

double resnet_loss(const ResCache& cache, const Vector& y, const Loss& loss) {
    if (y.size() != cache.output.size()) throw ShapeMismatch("resnet_loss: label count does not match outputs");
    double acc = 0.0;
    for (Index n = 0; n < y.size(); ++n) acc += loss(cache.output(n), y(n));
    return acc / static_cast<double>(y.size());
}

ResBackward resnet_backward(const ResNet& net, const ResCache& cache, const Vector& y, const Loss& loss) {
    const Index L = net.depth();
    if (static_cast<Index>(cache.beta.size()) != L + 1 || y.size() != cache.output.size())
        throw ShapeMismatch("resnet_backward: cache does not match net and labels");
    const auto N = static_cast<double>(y.size());
    const auto m = static_cast<double>(net.m);

    ResBackward b;
    b.Dbeta.resize(L + 1);
    b.Dalpha.resize(L + 1);
    b.D_out.resize(y.size());
    for (Index n = 0; n < y.size(); ++n) b.D_out(n) = loss.prime1(cache.output(n), y(n));

    b.Dbeta[L] = ((b.D_out * net.V[L].transpose()) / m).cwiseProduct(h_prime(net.h1, cache.beta[L]));
    for (Index l = L; l >= 2; --l) {
        b.Dalpha[l] = b.Dbeta[l].cwiseProduct(h_prime(net.h2, cache.alpha[l]));
        b.Dbeta[l - 1] = ((b.Dalpha[l] * net.V[l - 1].transpose()) / m).cwiseProduct(h_prime(net.h1, cache.beta[l - 1])) +
                         b.Dbeta[l];
    }

    b.G.resize(L + 1);
    b.G[L] = (cache.h1_beta[L].transpose() * b.D_out) / (N * m);
    for (Index l = 2; l <= L; ++l) b.G[l - 1] = (cache.h1_beta[l - 1].transpose() * b.Dalpha[l]) / (N * m);
    b.G[0] = (cache.beta[0].transpose() * b.Dbeta[1]) / (N * static_cast<double>(net.d));
    return b;
}

void resnet_step_inplace(ResNet& net, const std::vector<Matrix>& G, double eta) {
    if (G.size() != net.V.size()) throw ShapeMismatch("resnet_step: gradient layer count mismatch");
    const Index L = net.depth();
    const auto m = static_cast<double>(net.m);
    for (Index l = 0; l <= L; ++l) {
        if (G[l].rows() != net.V[l].rows() || G[l].cols() != net.V[l].cols())
            throw ShapeMismatch("resnet_step: gradient shape mismatch");
        const double fan_in = l == 0 ? static_cast<double>(net.d) : m;
        const double fan_out = l == L ? 1.0 : m;
        net.V[l] -= (eta * fan_in * fan_out) * G[l];
    }
}

ResNet resnet_step(const ResNet& net, const ResBackward& grads, double eta) {
    ResNet next = net;
    resnet_step_inplace(next, grads.G, eta);
    return next;
}

double skip_perturbation(const ResCache& cache) {
    const auto L = static_cast<Index>(cache.beta.size()) - 1;
    if (L < 2) throw InvalidArgument("skip_perturbation: need L >= 2");
    double worst = 0.0;
    for (Index l = 2; l <= L; ++l) worst = std::max(worst, max_abs(cache.beta[l] - cache.beta[l - 1]));
    return worst;
}

RunRecord make_record(std::size_t step, double eta, double loss, const ResNet& net, const ResCache& cache) {
    RunRecord r;
    r.step = step;
    r.t = static_cast<double>(step) * eta;
    r.loss = loss;
    for (const auto& V : net.V) r.max_weight.push_back(max_abs(V));
    for (Index l = 1; l <= net.depth(); ++l)
        r.spread.push_back(net.m >= 2 ? column_spread(cache.beta[l]) : std::numeric_limits<double>::quiet_NaN());
    if (net.depth() >= 2) r.skip = skip_perturbation(cache);
    return r;
}

ResTrainResult train_resnet(const ResNet& net, const Dataset& data, const Loss& loss, double eta,
                            std::size_t K, const TrainOptions& options) {
    net.validate();
    const std::size_t cadence = options.cadence ? options.cadence : default_cadence(K);

    ResTrainResult result{net, {}};
    for (std::size_t k = 0;; ++k) {
        const ResCache cache = resnet_forward(result.net, data);
        const double value = resnet_loss(cache, data.y, loss);
        if (!std::isfinite(value)) throw NonFiniteLoss(k);
        if (k == K || k % cadence == 0) result.records.push_back(make_record(k, eta, value, result.net, cache));
        if (k == K) break;
        const ResBackward back = resnet_backward(result.net, cache, data.y, loss);
        resnet_step_inplace(result.net, back.G, eta);
    }
    return result;
}

} // namespace mfnet
