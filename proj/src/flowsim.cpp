#include "mfnet/flowsim.hpp"

#include <cmath>

#include "mfnet/errors.hpp"

namespace mfnet {

namespace {

// One update of the particle state from the gradient already evaluated at it.
void dnn_update(DnnNet& net, const DnnGrads& grads, const Dataset& data, const Loss& loss, double eta,
                Integrator integrator) {
    if (integrator == Integrator::euler) {
        scaled_gd_step_inplace(net, grads, eta);
        return;
    }
    const DnnNet half = scaled_gd_step(net, grads, 0.5 * eta);
    const FeatureCache cache = dnn_forward(half, data);
    scaled_gd_step_inplace(net, dnn_backward(half, cache, data.y, loss).grads, eta);
}

void res_update(ResNet& net, const std::vector<Matrix>& G, const Dataset& data, const Loss& loss, double eta,
                Integrator integrator) {
    if (integrator == Integrator::euler) {
        resnet_step_inplace(net, G, eta);
        return;
    }
    ResNet half = net;
    resnet_step_inplace(half, G, 0.5 * eta);
    const ResCache cache = resnet_forward(half, data);
    resnet_step_inplace(net, resnet_backward(half, cache, data.y, loss).G, eta);
}

double dnn_weight_deviation(const DnnNet& a, const DnnNet& ref) {
    double worst = 0.0;
    for (std::size_t l = 0; l < a.W.size(); ++l)
        worst = std::max(worst, ((a.W[l] - ref.W[l]).cwiseAbs().array() / (1.0 + ref.W[l].cwiseAbs().array()))
                                    .maxCoeff());
    return worst;
}

std::size_t steps_for(double T, double eta) {
    if (!(eta > 0.0) || !(T >= 0.0)) throw InvalidArgument("refinement: need eta > 0 and T >= 0");
    const double k = T / eta;
    const double rounded = std::round(k);
    if (std::abs(k - rounded) > 1e-9 * std::max(1.0, k))
        throw InvalidArgument("refinement: T / eta must be an integer");
    return static_cast<std::size_t>(rounded);
}

} // namespace

Integrator parse_integrator(std::string_view s) {
    if (s == "euler") return Integrator::euler;
    if (s == "midpoint") return Integrator::midpoint;
    throw InvalidArgument("unknown integrator '" + std::string(s) + "'");
}

DnnTrajectory evolve(const DnnNet& net, const Dataset& data, const Loss& loss, double eta, std::size_t K,
                     Integrator integrator, const TrainOptions& options, const DnnObserver& observer) {
    net.validate();
    const std::size_t cadence = options.cadence ? options.cadence : default_cadence(K);

    DnnTrajectory traj{net, {}};
    for (std::size_t k = 0;; ++k) {
        const FeatureCache cache = dnn_forward(traj.net, data);
        const double value = dnn_loss(cache, data.y, loss);
        if (!std::isfinite(value)) throw NonFiniteLoss(k);
        if (observer) observer(k, traj.net, cache);
        if (k == K || k % cadence == 0) traj.records.push_back(make_record(k, eta, value, traj.net, cache));
        if (k == K) break;
        const DnnBackward back = dnn_backward(traj.net, cache, data.y, loss);
        dnn_update(traj.net, back.grads, data, loss, eta, integrator);
    }
    return traj;
}

ResTrajectory evolve(const ResNet& net, const Dataset& data, const Loss& loss, double eta, std::size_t K,
                     Integrator integrator, const TrainOptions& options, const ResObserver& observer) {
    net.validate();
    const std::size_t cadence = options.cadence ? options.cadence : default_cadence(K);

    ResTrajectory traj{net, {}};
    for (std::size_t k = 0;; ++k) {
        const ResCache cache = resnet_forward(traj.net, data);
        const double value = resnet_loss(cache, data.y, loss);
        if (!std::isfinite(value)) throw NonFiniteLoss(k);
        if (observer) observer(k, traj.net, cache);
        if (k == K || k % cadence == 0) traj.records.push_back(make_record(k, eta, value, traj.net, cache));
        if (k == K) break;
        const ResBackward back = resnet_backward(traj.net, cache, data.y, loss);
        res_update(traj.net, back.G, data, loss, eta, integrator);
    }
    return traj;
}

StepRefinement step_refinement(const DnnNet& net, const Dataset& data, const Loss& loss, double T, double eta,
                               int ratio, Integrator integrator) {
    if (ratio < 1) throw InvalidArgument("step_refinement: ratio must be >= 1");
    net.validate();
    const std::size_t K = steps_for(T, eta);
    const double fine_eta = eta / ratio;

    DnnNet coarse = net;
    DnnNet fine = net;
    StepRefinement out;
    for (std::size_t k = 1; k <= K; ++k) {
        {
            const FeatureCache cache = dnn_forward(coarse, data);
            dnn_update(coarse, dnn_backward(coarse, cache, data.y, loss).grads, data, loss, eta, integrator);
        }
        for (int s = 0; s < ratio; ++s) {
            const FeatureCache cache = dnn_forward(fine, data);
            dnn_update(fine, dnn_backward(fine, cache, data.y, loss).grads, data, loss, fine_eta, integrator);
        }
        const double lc = dnn_loss(dnn_forward(coarse, data), data.y, loss);
        const double lf = dnn_loss(dnn_forward(fine, data), data.y, loss);
        if (!std::isfinite(lc) || !std::isfinite(lf)) throw NonFiniteLoss(k);
        out.loss_deviation = std::max(out.loss_deviation, std::abs(lc - lf));
        out.weight_deviation = std::max(out.weight_deviation, dnn_weight_deviation(coarse, fine));
    }
    return out;
}

std::uint64_t replicate_seed(std::uint64_t seed, Index r) {
    return split_stream(seed, {0, static_cast<std::uint64_t>(r), purpose::replicate});
}

WidthRefinement width_refinement(const Dataset& data, const WidthRefinementSpec& spec) {
    if (spec.replicates < 1) throw InvalidArgument("width_refinement: need at least one replicate");
    for (Index m : spec.m_grid)
        if (m > spec.m_ref) throw InvalidArgument("width_refinement: m_ref must not be below the grid");
    const std::size_t K = steps_for(spec.T, spec.eta);
    TrainOptions every_step;
    every_step.cadence = 1;

    const auto run = [&](Index m, std::uint64_t seed) {
        const std::vector<Index> hidden(static_cast<std::size_t>(spec.depth), m);
        const DnnInit init = init_dnn_regression(data, hidden, spec.sigma1, spec.C3, seed, spec.act);
        std::vector<double> losses;
        for (const auto& r : train_dnn(init.net, data, spec.loss, spec.eta, K, every_step).records)
            losses.push_back(r.loss);
        return losses;
    };

    WidthRefinement out;
    out.widths = spec.m_grid;
    out.deviation.assign(spec.m_grid.size(), 0.0);
    out.per_replicate.assign(spec.m_grid.size(), {});
    for (Index r = 0; r < spec.replicates; ++r) {
        const std::uint64_t seed = replicate_seed(spec.seed, r);
        const std::vector<double> ref = run(spec.m_ref, seed);
        for (std::size_t g = 0; g < spec.m_grid.size(); ++g) {
            const std::vector<double> cur =
                spec.m_grid[g] == spec.m_ref ? ref : run(spec.m_grid[g], seed);
            double worst = 0.0;
            for (std::size_t k = 0; k < ref.size(); ++k) worst = std::max(worst, std::abs(cur[k] - ref[k]));
            out.per_replicate[g].push_back(worst);
            out.deviation[g] += worst / static_cast<double>(spec.replicates);
        }
    }
    return out;
}

} // namespace mfnet
