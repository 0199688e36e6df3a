#pragma once

#include <functional>
#include <vector>

#include "mfnet/config_io.hpp"
#include "mfnet/funcs.hpp"

namespace mfnet {

/// Fully connected network. widths = {d, m_1, ..., m_L, 1}; W[l-1] holds the
/// m_{l-1} x m_l weights of layer l for l in [1..L+1]. The 1/m averaging is
/// applied by the forward and backward passes, never stored in W.
struct DnnNet {
    std::vector<Index> widths;
    std::vector<Matrix> W;
    Activation act;

    Index depth() const { return static_cast<Index>(W.size()) - 1; }
    Index input_dim() const { return widths.front(); }

    /// Throws ShapeMismatch / InvalidArgument on inconsistent shapes or
    /// non-finite entries.
    void validate() const;

    static DnnNet zeros(Index d, const std::vector<Index>& hidden, const Activation& act);
};

/// theta[0] = X (N x d); theta[l] and h_theta[l] are N x m_l for l in [1..L];
/// h_theta[0] is unused.
struct FeatureCache {
    std::vector<Matrix> theta;
    std::vector<Matrix> h_theta;
    Vector output;
};

/// D[l] is N x m_l for l in [1..L] (D[0] unused); D_out has length N.
struct BackwardCache {
    Vector D_out;
    std::vector<Matrix> D;
};

/// G[l-1] matches W[l-1].
struct DnnGrads {
    std::vector<Matrix> G;
};

struct DnnBackward {
    BackwardCache cache;
    DnnGrads grads;
};

FeatureCache dnn_forward(const DnnNet& net, const Dataset& data);
double dnn_loss(const FeatureCache& cache, const Vector& y, const Loss& loss);
DnnBackward dnn_backward(const DnnNet& net, const FeatureCache& cache, const Vector& y, const Loss& loss);

/// W_l <- W_l - eta m_{l-1} m_l G_l.
DnnNet scaled_gd_step(const DnnNet& net, const DnnGrads& grads, double eta);
void scaled_gd_step_inplace(DnnNet& net, const DnnGrads& grads, double eta);

/// Max pairwise infinity-norm distance between the columns of theta[layer].
double feature_spread(const FeatureCache& cache, Index layer);

/// Same quantity for a bare N x m feature matrix.
double column_spread(const Matrix& features);

/// Every step for K <= 1000, else every ceil(K / 1000) steps.
std::size_t default_cadence(std::size_t K);

struct TrainOptions {
    std::size_t cadence = 0;  // 0 selects default_cadence(K)
};

struct DnnTrainResult {
    DnnNet net;
    std::vector<RunRecord> records;
};

/// Records the state after k steps for k = 0, cadence, 2 cadence, ... and K.
DnnTrainResult train_dnn(const DnnNet& net, const Dataset& data, const Loss& loss, double eta,
                         std::size_t K, const TrainOptions& options = {});

RunRecord make_record(std::size_t step, double eta, double loss, const DnnNet& net, const FeatureCache& cache);

} // namespace mfnet
