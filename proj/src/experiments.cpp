#include "mfnet/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "mfnet/dnn.hpp"
#include "mfnet/errors.hpp"
#include "mfnet/flowsim.hpp"
#include "mfnet/funcs.hpp"
#include "mfnet/meanfield.hpp"
#include "mfnet/resnet.hpp"

namespace mfnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr unsigned kMaxWorkers = 4;

// Evaluates fn(0..n-1) on a bounded pool; slot i always receives fn(i), so
// results do not depend on the worker count.
template <class F>
auto parallel_map(std::size_t n, F&& fn) -> std::vector<decltype(fn(std::size_t{0}))> {
    using R = decltype(fn(std::size_t{0}));
    std::vector<R> out(n);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const auto workers = static_cast<std::size_t>(std::min({hw, kMaxWorkers, static_cast<unsigned>(std::max<std::size_t>(n, 1))}));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    out[i] = fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Index knob(const ExperimentConfig& c, const std::string& key, double fallback) {
    return static_cast<Index>(std::llround(c.tolerance(key, fallback)));
}

std::vector<Index> hidden_widths(const ExperimentConfig& c, Index m) {
    return std::vector<Index>(static_cast<std::size_t>(c.depth), m);
}

std::vector<Index> grid_or(const ExperimentConfig& c, std::vector<Index> fallback) {
    return c.m_grid.empty() ? fallback : c.m_grid;
}

// Fits and judges a slope; a grid too small to fit is recorded as a note.
void judge_slope(StudyReport& report, const std::vector<double>& xs, const std::vector<double>& ys, double lo,
                 double hi, const std::string& name) {
    try {
        report.fit = fit_loglog_slope(xs, ys);
        report.verdicts.push_back(make_verdict(name, report.fit->slope, lo, hi));
    } catch (const DegenerateFit& e) {
        report.notes.push_back(std::string("no slope fitted: ") + e.what());
    } catch (const InvalidArgument& e) {
        report.notes.push_back(std::string("no slope fitted: ") + e.what());
    }
}

double mean(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

nlohmann::json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

} // namespace

Verdict make_verdict(std::string name, double value, double lo, double hi) {
    return {std::move(name), value, lo, hi, value >= lo && value <= hi};
}

bool StudyReport::passed() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

Family parse_family(std::string_view s) {
    if (s == "dnn") return Family::dnn;
    if (s == "resnet") return Family::resnet;
    throw InvalidArgument("unknown family '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Studies

StudyReport run_degeneracy(const ExperimentConfig& config) {
    config.validate();
    Stopwatch clock;
    const Dataset data = make_dataset(config);
    const Activation act = Activation::parse(config.activation);
    const Loss loss = Loss::parse(config.loss);
    const std::vector<Index> grid = grid_or(config, {64, 128, 256, 512, 1024, 2048});
    const Index layer = knob(config, "layer", 2);
    const Index replicates = knob(config, "replicates", 4);
    const double C3 = config.tolerance("C3", 1.0);
    if (layer < 1 || layer > config.depth) throw InvalidArgument("degeneracy: layer outside [1..depth]");

    TrainOptions every_step;
    every_step.cadence = 1;
    const auto running_max = [&](const DnnNet& net) {
        double worst = 0.0;
        for (const auto& r : train_dnn(net, data, loss, config.eta, config.steps, every_step).records)
            worst = std::max(worst, r.spread[static_cast<std::size_t>(layer - 1)]);
        return worst;
    };

    struct Point {
        double fixed = 0.0;
        double regression = std::numeric_limits<double>::quiet_NaN();
    };
    const std::size_t jobs = grid.size() * static_cast<std::size_t>(replicates);
    const auto points = parallel_map(jobs, [&](std::size_t job) {
        const Index m = grid[job / static_cast<std::size_t>(replicates)];
        const std::uint64_t seed = replicate_seed(config.seed, static_cast<Index>(job % replicates));
        Point p;
        p.fixed = running_max(init_dnn_fixed_variance(data, hidden_widths(config, m), config.sigma1, seed, act).net);
        try {
            p.regression = running_max(
                init_dnn_regression(data, hidden_widths(config, m), config.sigma1, C3, seed, act).net);
        } catch (const InverseUnstable&) {
        }
        return p;
    });

    StudyReport report;
    report.study = "degeneracy";
    report.columns = {"m", "delta_fixed", "delta_regression"};
    std::vector<double> xs, ys;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<double> fixed, reg;
        for (Index r = 0; r < replicates; ++r) {
            const Point& p = points[g * static_cast<std::size_t>(replicates) + static_cast<std::size_t>(r)];
            fixed.push_back(p.fixed);
            reg.push_back(p.regression);
        }
        const double reg_mean = mean(reg);
        report.rows.push_back({static_cast<double>(grid[g]), mean(fixed), reg_mean});
        xs.push_back(static_cast<double>(grid[g]));
        ys.push_back(mean(fixed));
        if (std::isnan(reg_mean))
            report.notes.push_back("regression init unavailable at m = " + std::to_string(grid[g]));
    }
    judge_slope(report, xs, ys, config.tolerance("slope_lo", -0.7), config.tolerance("slope_hi", -0.3),
                "fixed-variance spread slope");

    const double first = report.rows.front()[2];
    const double last = report.rows.back()[2];
    if (std::isfinite(first) && std::isfinite(last) && first > 0.0)
        report.verdicts.push_back(
            make_verdict("regression spread retained", last / first, config.tolerance("contrast_ratio", 0.1), kInf));
    report.wall_seconds = clock.seconds();
    return report;
}

StudyReport run_gram(const ExperimentConfig& config) {
    config.validate();
    Stopwatch clock;
    const Dataset data = make_dataset(config);
    const Activation act = Activation::parse(config.activation);
    const std::vector<Index> grid = grid_or(config, {256, 512, 1024, 2048, 4096, 8192});
    const Index replicates = knob(config, "replicates", 8);

    const GramChain chain = gram_chain(data, config.sigma1, act, 2);
    const Matrix& K1 = chain.K[1];
    const double K1_norm = max_abs(K1);

    const std::size_t jobs = grid.size() * static_cast<std::size_t>(replicates);
    const auto errors = parallel_map(jobs, [&](std::size_t job) {
        const Index m = grid[job / static_cast<std::size_t>(replicates)];
        const std::uint64_t seed = replicate_seed(config.seed, static_cast<Index>(job % replicates));
        const DnnInit init = init_dnn_standard(data, {m}, config.sigma1, seed, act);
        return max_abs(empirical_gram(init.cache.theta[1], act) - K1);
    });

    StudyReport report;
    report.study = "gram";
    report.columns = {"m", "max_abs_error", "relative_error"};
    std::vector<double> xs, ys;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const std::vector<double> slice(errors.begin() + static_cast<std::ptrdiff_t>(g * replicates),
                                        errors.begin() + static_cast<std::ptrdiff_t>((g + 1) * replicates));
        const double err = mean(slice);
        report.rows.push_back({static_cast<double>(grid[g]), err, err / K1_norm});
        xs.push_back(static_cast<double>(grid[g]));
        ys.push_back(err);
    }
    judge_slope(report, xs, ys, config.tolerance("slope_lo", -0.7), config.tolerance("slope_hi", -0.3),
                "gram error slope");
    report.verdicts.push_back(
        make_verdict("relative error at largest m", report.rows.back()[2], 0.0, config.tolerance("rel_at_max", 0.05)));
    report.notes.push_back("lambda_min(K_1) = " + format_number(psd_certificate(K1).lambda_min));
    report.wall_seconds = clock.seconds();
    return report;
}

StudyReport run_eps1(const ExperimentConfig& config, Family family) {
    config.validate();
    Stopwatch clock;
    const Dataset data = make_dataset(config);
    const Activation act = Activation::parse(config.activation);
    const std::vector<Index> grid = grid_or(config, {64, 256, 1024, 4096});
    const Index replicates = knob(config, "replicates", 8);
    const double C = config.tolerance("C3", 1.0);
    const Index L = config.depth;

    std::optional<GramChain> chain;
    std::optional<BetaGramChain> beta_chain;
    StudyReport report;
    if (family == Family::dnn) {
        report.study = "eps1_dnn";
        chain = gram_chain(data, config.sigma1, act, L);
        report.notes.push_back("lambda_bar = " + format_number(chain->lambda_bar));
    } else {
        report.study = "eps1_resnet";
        const Index samples = knob(config, "mc_samples", static_cast<double>(kDefaultMcSamples));
        beta_chain = mc_beta_gram(data, config.sigma1, act, act, L, samples,
                                  split_stream(config.seed, {0, 0, purpose::mc_gram}));
        double worst_se = 0.0;
        for (const auto& se : beta_chain->std_error) worst_se = std::max(worst_se, max_abs(se));
        report.notes.push_back("Monte-Carlo samples = " + std::to_string(samples) +
                               ", max standard error = " + format_number(worst_se));
    }

    const std::size_t jobs = grid.size() * static_cast<std::size_t>(replicates);
    const auto audits = parallel_map(jobs, [&](std::size_t job) {
        const Index m = grid[job / static_cast<std::size_t>(replicates)];
        const std::uint64_t seed = replicate_seed(config.seed, static_cast<Index>(job % replicates));
        std::pair<Eps1Report, int> out;
        if (family == Family::dnn) {
            const DnnInit init = init_dnn_regression(data, hidden_widths(config, m), config.sigma1, C, seed, act);
            const IdealDnn ideal = construct_ideal_dnn(data, init, *chain);
            out.first = eps1_audit_dnn(init, ideal);
            out.second = static_cast<int>(std::count(ideal.fallback_used.begin(), ideal.fallback_used.end(), true));
        } else {
            const ResInit init = init_resnet_regression(data, m, L, config.sigma1, C, seed, act, act);
            const IdealResNet ideal = construct_ideal_resnet(data, init, *beta_chain);
            out.first = eps1_audit_resnet(init, ideal);
            out.second = static_cast<int>(std::count(ideal.fallback_used.begin(), ideal.fallback_used.end(), true));
        }
        return out;
    });

    report.columns = {"m", "eps1", "first", "middle", "last", "particles", "fallback_layers"};
    std::vector<double> xs, ys;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<double> row(7, 0.0);
        row[0] = static_cast<double>(grid[g]);
        for (Index r = 0; r < replicates; ++r) {
            const auto& [rep, fallbacks] = audits[g * static_cast<std::size_t>(replicates) + static_cast<std::size_t>(r)];
            const double w = 1.0 / static_cast<double>(replicates);
            row[1] += w * rep.eps1;
            row[2] += w * rep.first;
            row[3] += w * rep.middle;
            row[4] += w * rep.last;
            row[5] += w * rep.particles;
            row[6] += fallbacks;
        }
        report.rows.push_back(row);
        xs.push_back(row[0]);
        ys.push_back(row[1]);
    }
    judge_slope(report, xs, ys, config.tolerance("slope_lo", -0.75), config.tolerance("slope_hi", -0.3),
                "eps1 slope");
    report.wall_seconds = clock.seconds();
    return report;
}

StudyReport run_refine(const ExperimentConfig& config) {
    config.validate();
    Stopwatch clock;
    const Dataset data = make_dataset(config);
    const Activation act = Activation::parse(config.activation);
    const Loss loss = Loss::parse(config.loss);
    const double C3 = config.tolerance("C3", 1.0);
    const double T = config.tolerance("T", 1.0);

    StudyReport report;
    report.study = "refine";
    report.columns = {"axis", "x", "deviation", "loss_deviation"};

    // Step axis: first-order integration halves the gap with the step.
    const std::vector<Index> toy_hidden(static_cast<std::size_t>(knob(config, "toy_depth", 3)), config.widths.front());
    const DnnInit toy = init_dnn_regression(data, toy_hidden, config.sigma1, C3, config.seed, act);
    const StepRefinement coarse = step_refinement(toy.net, data, loss, T, config.eta, 2);
    const StepRefinement fine = step_refinement(toy.net, data, loss, T, config.eta / 2.0, 2);
    report.rows.push_back({0.0, config.eta, coarse.weight_deviation, coarse.loss_deviation});
    report.rows.push_back({0.0, config.eta / 2.0, fine.weight_deviation, fine.loss_deviation});
    report.verdicts.push_back(make_verdict("step refinement ratio", coarse.weight_deviation / fine.weight_deviation,
                                           config.tolerance("ratio_lo", 1.4), config.tolerance("ratio_hi", 2.8)));
    const StepRefinement mid_coarse = step_refinement(toy.net, data, loss, T, config.eta, 2, Integrator::midpoint);
    const StepRefinement mid_fine = step_refinement(toy.net, data, loss, T, config.eta / 2.0, 2, Integrator::midpoint);
    report.notes.push_back("midpoint step refinement ratio = " +
                           format_number(mid_coarse.weight_deviation / mid_fine.weight_deviation));

    // Width axis: loss trajectories approach the wide reference run.
    WidthRefinementSpec spec;
    spec.m_grid = grid_or(config, {64, 256, 1024});
    spec.m_ref = knob(config, "m_ref", 4096);
    spec.depth = config.depth;
    spec.sigma1 = config.sigma1;
    spec.C3 = C3;
    spec.eta = config.eta;
    spec.T = config.tolerance("width_T", T);
    spec.replicates = knob(config, "replicates", 12);
    spec.seed = config.seed;
    spec.act = act;
    spec.loss = loss;
    const WidthRefinement widths = width_refinement(data, spec);
    std::vector<double> xs;
    for (std::size_t g = 0; g < widths.widths.size(); ++g) {
        xs.push_back(static_cast<double>(widths.widths[g]));
        report.rows.push_back({1.0, xs.back(), widths.deviation[g], widths.deviation[g]});
    }
    judge_slope(report, xs, widths.deviation, config.tolerance("width_slope_lo", -0.8),
                config.tolerance("width_slope_hi", -0.25), "width refinement slope");
    report.notes.push_back("the continuous flow is not computable; step and width refinement stand in for it");
    report.wall_seconds = clock.seconds();
    return report;
}

StudyReport run_converge(const ExperimentConfig& config) {
    config.validate();
    Stopwatch clock;
    const Dataset data = make_dataset(config);
    const Activation act = Activation::parse(config.activation);
    const Loss loss = Loss::parse(config.loss);
    const double C5 = config.tolerance("C5", 1.0);
    const bool zero_init = config.tolerance("zero_init", 0.0) != 0.0;
    const Index m = config.widths.front();

    const ResInit init = zero_init
                             ? init_resnet_zero(data, m, config.depth, config.sigma1, C5, config.seed, act, act)
                             : init_resnet_regression(data, m, config.depth, config.sigma1, C5, config.seed, act, act);
    TrainOptions every_step;
    every_step.cadence = 1;
    const ResTrainResult run = train_resnet(init.net, data, loss, config.eta, config.steps, every_step);

    StudyReport report;
    report.study = "converge";
    report.columns = {"step", "t", "loss", "skip"};
    const double bound = act.declared_L1();
    double worst_skip = 0.0;
    int violations = 0;
    for (const auto& r : run.records) {
        report.rows.push_back({static_cast<double>(r.step), r.t, r.loss, r.skip});
        if (std::isfinite(r.skip)) {
            worst_skip = std::max(worst_skip, r.skip);
            if (r.skip > bound) ++violations;
        }
    }
    const double initial = run.records.front().loss;
    const double final_loss = run.records.back().loss;
    report.verdicts.push_back(make_verdict("final loss", final_loss, 0.0, config.tolerance("loss_threshold", 0.02)));
    report.verdicts.push_back(make_verdict("skip bound violations", violations, 0.0, 0.0));
    report.notes.push_back("initial loss = " + format_number(initial) + ", final / initial = " +
                           format_number(initial > 0.0 ? final_loss / initial : 0.0));
    report.notes.push_back("max skip perturbation = " + format_number(worst_skip) + " (bound " +
                           format_number(bound) + ")");
    if (!loss.compliant()) report.notes.push_back("loss " + loss.id() + " has an unbounded gradient");
    report.wall_seconds = clock.seconds();
    return report;
}

StudyReport run_audit(const ExperimentConfig& config) {
    Stopwatch clock;
    AuditGrid grid;
    grid.lo = config.tolerance("grid_lo", -10.0);
    grid.hi = config.tolerance("grid_hi", 10.0);
    grid.points = knob(config, "grid_points", 2001);

    StudyReport report;
    report.study = "audit";
    report.columns = {"member", "L1", "L2", "L3", "L4", "L5", "growth", "compliant"};

    const auto add = [&](const AuditRecord& a, bool expected) {
        const auto index = static_cast<double>(report.rows.size());
        report.rows.push_back({index, a.L1, a.L2, a.L3, a.L4, a.L5, a.growth, a.compliant ? 1.0 : 0.0});
        report.notes.push_back("member " + std::to_string(report.rows.size() - 1) + " = " + a.id);
        const double want = expected ? 1.0 : 0.0;
        report.verdicts.push_back(make_verdict(a.id + " compliance", a.compliant ? 1.0 : 0.0, want, want));
        return a;
    };

    const AuditRecord tanh = add(assumption_audit(Activation::tanh(), grid), true);
    add(assumption_audit(Activation::scaled_tanh(2.0), grid), true);
    add(assumption_audit(Activation::bounded_softplus(1.0), grid), true);
    add(assumption_audit(Loss::pseudo_huber(1.0), grid), true);
    add(assumption_audit(Loss::logistic(), grid), true);
    add(assumption_audit(Loss::squared(), grid), false);
    report.verdicts.push_back(make_verdict("tanh L1", tanh.L1, 1.0 - 1e-6, 1.0 + 1e-6));
    report.verdicts.push_back(make_verdict("tanh L2", tanh.L2, 1.0 - 1e-6, 1.0 + 1e-6));
    report.wall_seconds = clock.seconds();
    return report;
}

// ---------------------------------------------------------------------------
// Output

void write_report(const StudyReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    write_csv(dir / (report.study + ".csv"), report.columns, report.rows);

    nlohmann::json j;
    j["study"] = report.study;
    j["passed"] = report.passed();
    j["wall_seconds"] = report.wall_seconds;
    j["columns"] = report.columns;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json r = nlohmann::json::array();
        for (double v : row) r.push_back(number_or_null(v));
        rows.push_back(r);
    }
    j["rows"] = rows;
    if (report.fit) j["fit"] = {{"slope", report.fit->slope}, {"intercept", report.fit->intercept}};
    nlohmann::json verdicts = nlohmann::json::array();
    for (const auto& v : report.verdicts)
        verdicts.push_back({{"name", v.name},
                            {"value", number_or_null(v.value)},
                            {"lo", number_or_null(v.lo)},
                            {"hi", number_or_null(v.hi)},
                            {"pass", v.pass}});
    j["verdicts"] = verdicts;
    j["notes"] = report.notes;

    const auto path = dir / (report.study + ".json");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing", path.string());
    out << j.dump(2) << '\n';
}

ExperimentConfig default_config(std::string_view study) {
    ExperimentConfig c;
    c.seed = 0;
    c.dataset = {DatasetKind::gaussian_regression, 8, 4};
    if (study == "degeneracy") {
        c.depth = 3;
        c.steps = 50;
        c.eta = 0.05;
        c.m_grid = {64, 128, 256, 512, 1024, 2048};
    } else if (study == "gram") {
        c.depth = 2;
        c.m_grid = {256, 512, 1024, 2048, 4096, 8192};
    } else if (study == "eps1_dnn" || study == "eps1_resnet") {
        c.dataset = {DatasetKind::gaussian_regression, 8, 8};
        c.depth = 3;
        c.sigma1 = 2.0;
        c.m_grid = {64, 256, 1024, 4096};
        if (study == "eps1_resnet") {
            c.depth = 2;
            c.tolerances["mc_samples"] = 1e6;
            c.tolerances["replicates"] = 16;
        }
    } else if (study == "refine") {
        c.dataset = {DatasetKind::gaussian_regression, 4, 3};
        c.depth = 2;
        c.widths = {16};
        c.eta = 0.05;
        c.steps = 20;
        c.m_grid = {64, 256, 1024};
        c.tolerances["m_ref"] = 4096;
        c.tolerances["replicates"] = 12;
    } else if (study == "converge") {
        c.depth = 4;
        c.widths = {512};
        c.steps = 2000;
        c.eta = 0.0025;
        c.loss = "squared";
    } else if (study == "audit") {
        c.depth = 1;
    } else {
        throw InvalidArgument("unknown study '" + std::string(study) + "'");
    }
    return c;
}

} // namespace mfnet
