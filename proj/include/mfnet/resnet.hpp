#pragma once

#include <vector>

#include "mfnet/config_io.hpp"
#include "mfnet/dnn.hpp"
#include "mfnet/funcs.hpp"

namespace mfnet {

/// Single-width residual stack. V[0] is d x m, V[l-1] is m x m for
/// l in [2..L], V[L] is m x 1.
struct ResNet {
    Index d = 0;
    Index m = 0;
    std::vector<Matrix> V;
    Activation h1;
    Activation h2;

    Index depth() const { return static_cast<Index>(V.size()) - 1; }

    void validate() const;

    static ResNet zeros(Index d, Index m, Index L, const Activation& h1, const Activation& h2);
};

/// beta[0] = X, beta[l] for l in [1..L]; alpha[l] for l in [2..L] (alpha[0],
/// alpha[1] unused); h1_beta[l] = h1(beta[l]) for l in [1..L].
struct ResCache {
    std::vector<Matrix> beta;
    std::vector<Matrix> alpha;
    std::vector<Matrix> h1_beta;
    Vector output;
};

/// Dbeta[l] for l in [1..L]; Dalpha[l] for l in [2..L]; G[l-1] matches V[l-1].
struct ResBackward {
    Vector D_out;
    std::vector<Matrix> Dbeta;
    std::vector<Matrix> Dalpha;
    std::vector<Matrix> G;
};

ResCache resnet_forward(const ResNet& net, const Dataset& data);
double resnet_loss(const ResCache& cache, const Vector& y, const Loss& loss);
ResBackward resnet_backward(const ResNet& net, const ResCache& cache, const Vector& y, const Loss& loss);

/// V_1 <- V_1 - eta d m G_1, V_l <- V_l - eta m^2 G_l, V_{L+1} <- V_{L+1} - eta m G_{L+1}.
ResNet resnet_step(const ResNet& net, const ResBackward& grads, double eta);
void resnet_step_inplace(ResNet& net, const std::vector<Matrix>& G, double eta);

/// max over l in [2..L] of ||beta_l - beta_{l-1}||_inf. Requires L >= 2.
double skip_perturbation(const ResCache& cache);

struct ResTrainResult {
    ResNet net;
    std::vector<RunRecord> records;
};

ResTrainResult train_resnet(const ResNet& net, const Dataset& data, const Loss& loss, double eta,
                            std::size_t K, const TrainOptions& options = {});

RunRecord make_record(std::size_t step, double eta, double loss, const ResNet& net, const ResCache& cache);

} // namespace mfnet
