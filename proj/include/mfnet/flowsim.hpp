#pragma once

#include <functional>
#include <vector>

#include "mfnet/config_io.hpp"
#include "mfnet/dnn.hpp"
#include "mfnet/funcs.hpp"
#include "mfnet/meanfield.hpp"
#include "mfnet/resnet.hpp"

namespace mfnet {

enum class Integrator { euler, midpoint };

Integrator parse_integrator(std::string_view s);

struct DnnTrajectory {
    DnnNet net;
    std::vector<RunRecord> records;
};

struct ResTrajectory {
    ResNet net;
    std::vector<RunRecord> records;
};

/// Called after every forward evaluation at step k (before the update).
using DnnObserver = std::function<void(std::size_t k, const DnnNet&, const FeatureCache&)>;
using ResObserver = std::function<void(std::size_t k, const ResNet&, const ResCache&)>;

/// Explicit time stepping of the particle ensemble. Euler reproduces
/// train_dnn / train_resnet bit for bit; midpoint re-evaluates the gradient at
/// the half step.
DnnTrajectory evolve(const DnnNet& net, const Dataset& data, const Loss& loss, double eta, std::size_t K,
                     Integrator integrator, const TrainOptions& options = {}, const DnnObserver& observer = {});
ResTrajectory evolve(const ResNet& net, const Dataset& data, const Loss& loss, double eta, std::size_t K,
                     Integrator integrator, const TrainOptions& options = {}, const ResObserver& observer = {});

struct StepRefinement {
    double weight_deviation = 0.0;  // sup_k max_l max |w - w_ref| / (1 + |w_ref|)
    double loss_deviation = 0.0;    // sup_k |loss - loss_ref|
};

/// Runs eta for T/eta steps and eta/ratio for ratio times as many, comparing
/// at the matched times k eta.
StepRefinement step_refinement(const DnnNet& net, const Dataset& data, const Loss& loss, double T, double eta,
                               int ratio, Integrator integrator = Integrator::euler);

struct WidthRefinementSpec {
    std::vector<Index> m_grid;
    Index m_ref = 4096;
    Index depth = 3;
    double sigma1 = 1.0;
    double C3 = 1.0;
    double eta = 0.05;
    double T = 1.0;
    Index replicates = 1;
    std::uint64_t seed = 0;
    Activation act;
    Loss loss;
};

struct WidthRefinement {
    std::vector<Index> widths;
    std::vector<double> deviation;  // mean over replicates of sup_k |L_m - L_ref|
    std::vector<std::vector<double>> per_replicate;
};

/// Regression initialization at every width from a shared seed per replicate,
/// so the first nodes of each width coincide with those of the reference.
WidthRefinement width_refinement(const Dataset& data, const WidthRefinementSpec& spec);

/// Seed of replicate r derived from a base seed.
std::uint64_t replicate_seed(std::uint64_t seed, Index r);

} // namespace mfnet
