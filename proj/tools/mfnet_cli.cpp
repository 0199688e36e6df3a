// Command-line harness: runs one study, writes <out>/<study>.csv and .json,
// prints the verdicts and exits 0 only when every verdict passes.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "mfnet/errors.hpp"
#include "mfnet/experiments.hpp"

namespace {

struct Common {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
};

void add_common(CLI::App* sub, Common& common) {
    sub->add_option("--config", common.config_path, "JSON config; study defaults are used when omitted")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", common.out_dir, "output directory (overrides the config)");
    sub->add_option("--seed", common.seed, "master seed (overrides the config)")->check(CLI::NonNegativeNumber);
}

mfnet::ExperimentConfig resolve(const std::string& study, const Common& common) {
    mfnet::ExperimentConfig config =
        common.config_path.empty() ? mfnet::default_config(study) : mfnet::load_config(common.config_path);
    if (common.seed >= 0) config.seed = static_cast<std::uint64_t>(common.seed);
    if (!common.out_dir.empty()) config.output = common.out_dir;
    config.validate();
    return config;
}

int report(const mfnet::StudyReport& r, const std::string& out) {
    mfnet::write_report(r, out);
    for (const auto& v : r.verdicts)
        std::printf("[%s] %s = %.6g in [%.6g, %.6g]\n", v.pass ? "PASS" : "FAIL", v.name.c_str(), v.value, v.lo,
                    v.hi);
    for (const auto& n : r.notes) std::printf("  note: %s\n", n.c_str());
    std::printf("%s: %s in %.1f s, written to %s\n", r.study.c_str(), r.passed() ? "passed" : "failed",
                r.wall_seconds, out.c_str());
    return r.passed() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-field network simulator: desk-scale studies"};
    app.require_subcommand(1);

    Common common;
    std::string family = "dnn";

    auto* degeneracy = app.add_subcommand("degeneracy", "feature collapse under fixed-variance initialization");
    auto* gram = app.add_subcommand("gram", "empirical Gram matrix against the analytic chain");
    auto* eps1 = app.add_subcommand("eps1", "audited closeness of the regression initialization");
    eps1->add_option("--family", family, "network family")->check(CLI::IsMember({"dnn", "resnet"}));
    auto* refine = app.add_subcommand("refine", "step and width refinement of training trajectories");
    auto* converge = app.add_subcommand("converge", "Res-Net training with the skip bound checked");
    auto* audit = app.add_subcommand("audit", "regularity audit of activations and losses");
    for (auto* sub : {degeneracy, gram, eps1, refine, converge, audit}) add_common(sub, common);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*degeneracy) {
            const auto config = resolve("degeneracy", common);
            return report(mfnet::run_degeneracy(config), config.output);
        }
        if (*gram) {
            const auto config = resolve("gram", common);
            return report(mfnet::run_gram(config), config.output);
        }
        if (*eps1) {
            const auto config = resolve("eps1_" + family, common);
            return report(mfnet::run_eps1(config, mfnet::parse_family(family)), config.output);
        }
        if (*refine) {
            const auto config = resolve("refine", common);
            return report(mfnet::run_refine(config), config.output);
        }
        if (*converge) {
            const auto config = resolve("converge", common);
            return report(mfnet::run_converge(config), config.output);
        }
        const auto config = resolve("audit", common);
        return report(mfnet::run_audit(config), config.output);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
