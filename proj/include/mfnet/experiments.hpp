#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfnet/config_io.hpp"
#include "mfnet/numerics.hpp"

namespace mfnet {

struct Verdict {
    std::string name;
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool pass = false;
};

/// pass = lo <= value <= hi (NaN never passes).
Verdict make_verdict(std::string name, double value, double lo, double hi);

struct StudyReport {
    std::string study;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::optional<LogLogFit> fit;
    std::vector<Verdict> verdicts;
    std::vector<std::string> notes;
    double wall_seconds = 0.0;

    bool passed() const;
};

enum class Family { dnn, resnet };

Family parse_family(std::string_view s);

/// Feature collapse under fixed-variance initialization versus the
/// regression initialization on the same width grid.
StudyReport run_degeneracy(const ExperimentConfig& config);

/// Empirical first-layer Gram against the analytic chain over the width grid.
StudyReport run_gram(const ExperimentConfig& config);

/// Audited eps1 of the regression initializations over the width grid.
StudyReport run_eps1(const ExperimentConfig& config, Family family);

/// Step refinement on the configured toy net and width refinement of the
/// training loss against a wide reference run.
StudyReport run_refine(const ExperimentConfig& config);

/// Res-Net training to the configured horizon with the skip bound checked at
/// every recorded step.
StudyReport run_converge(const ExperimentConfig& config);

/// Regularity audit of the activation and loss catalog.
StudyReport run_audit(const ExperimentConfig& config);

/// Writes <dir>/<study>.csv (measurements) and <dir>/<study>.json (summary).
void write_report(const StudyReport& report, const std::filesystem::path& dir);

/// Desk-scale defaults for each study id (degeneracy, gram, eps1_dnn,
/// eps1_resnet, refine, converge, audit).
ExperimentConfig default_config(std::string_view study);

} // namespace mfnet
