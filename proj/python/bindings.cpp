#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mfnet/errors.hpp"
#include "mfnet/experiments.hpp"
#include "mfnet/flowsim.hpp"
#include "mfnet/meanfield.hpp"

namespace py = pybind11;
using namespace mfnet;

namespace {

Dataset to_dataset(const Matrix& X, const Vector& y) {
    Dataset data;
    data.X = X;
    data.y = y;
    data.x_inf_bound = X.size() ? X.cwiseAbs().maxCoeff() : 0.0;
    data.non_parallel = rows_non_parallel(X);
    data.validate();
    return data;
}

DnnNet to_dnn(const std::vector<Matrix>& W, const std::string& act) {
    DnnNet net;
    net.W = W;
    net.act = Activation::parse(act);
    if (!W.empty()) net.widths.push_back(W.front().rows());
    for (const auto& w : W) net.widths.push_back(w.cols());
    net.validate();
    return net;
}

ResNet to_resnet(const std::vector<Matrix>& V, const std::string& h1, const std::string& h2) {
    if (V.size() < 2) throw InvalidArgument("a residual net needs at least two weight layers");
    ResNet net;
    net.d = V.front().rows();
    net.m = V.front().cols();
    net.V = V;
    net.h1 = Activation::parse(h1);
    net.h2 = Activation::parse(h2);
    net.validate();
    return net;
}

py::list records_to_py(const std::vector<RunRecord>& records) {
    py::list out;
    for (const auto& r : records) {
        py::dict d;
        d["step"] = r.step;
        d["t"] = r.t;
        d["loss"] = r.loss;
        d["max_weight"] = r.max_weight;
        d["spread"] = r.spread;
        d["skip"] = r.skip;
        out.append(d);
    }
    return out;
}

py::dict report_to_py(const StudyReport& r) {
    py::dict d;
    d["study"] = r.study;
    d["columns"] = r.columns;
    d["rows"] = r.rows;
    if (r.fit) d["slope"] = r.fit->slope;
    else d["slope"] = py::none();
    py::list verdicts;
    for (const auto& v : r.verdicts)
        verdicts.append(py::dict(py::arg("name") = v.name, py::arg("value") = v.value, py::arg("lo") = v.lo,
                                 py::arg("hi") = v.hi, py::arg("passed") = v.pass));
    d["verdicts"] = verdicts;
    d["notes"] = r.notes;
    d["passed"] = r.passed();
    d["wall_seconds"] = r.wall_seconds;
    return d;
}

ExperimentConfig study_config(const std::string& study, const std::optional<std::string>& json) {
    return json ? parse_config(*json) : default_config(study);
}

} // namespace

PYBIND11_MODULE(_mfnet, m) {
    m.doc() = "Mean-field analysis of deep and residual networks at desk scale.";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<ShapeMismatch>(m, "ShapeMismatch", PyExc_ValueError);
    py::register_exception<InverseUnstable>(m, "InverseUnstable", PyExc_ArithmeticError);
    py::register_exception<NonFiniteLoss>(m, "NonFiniteLoss", PyExc_ArithmeticError);

    m.def(
        "synthetic_dataset",
        [](Index n, Index d, std::uint64_t seed, const std::string& kind) {
            const Dataset data = make_synthetic_dataset(n, d, seed, parse_dataset_kind(kind));
            return py::make_tuple(data.X, data.y);
        },
        py::arg("n"), py::arg("d"), py::arg("seed") = 0, py::arg("kind") = "gaussian_regression",
        "Synthetic inputs X (n x d, entries bounded by one) and labels y.");

    m.def(
        "activation",
        [](const std::string& id, const Vector& x) {
            const Activation a = Activation::parse(id);
            return py::make_tuple(Vector(h_eval(a, x)), Vector(h_prime(a, x)));
        },
        py::arg("id"), py::arg("x"), "Values and derivatives of an activation at x.");

    m.def(
        "dnn_forward",
        [](const std::vector<Matrix>& W, const Matrix& X, const Vector& y, const std::string& act) {
            const FeatureCache c = dnn_forward(to_dnn(W, act), to_dataset(X, y));
            return py::make_tuple(c.theta, c.output);
        },
        py::arg("weights"), py::arg("X"), py::arg("y"), py::arg("activation") = "tanh",
        "Features theta[0..L] and outputs of a deep net.");

    m.def(
        "train_dnn",
        [](const std::vector<Matrix>& W, const Matrix& X, const Vector& y, double eta, std::size_t steps,
           const std::string& act, const std::string& loss, const std::string& integrator) {
            const DnnTrajectory t = evolve(to_dnn(W, act), to_dataset(X, y), Loss::parse(loss), eta, steps,
                                           parse_integrator(integrator));
            return py::make_tuple(t.net.W, records_to_py(t.records));
        },
        py::arg("weights"), py::arg("X"), py::arg("y"), py::arg("eta"), py::arg("steps"),
        py::arg("activation") = "tanh", py::arg("loss") = "pseudo_huber", py::arg("integrator") = "euler",
        "Scaled gradient descent on a deep net; returns the final weights and run records.");

    m.def(
        "resnet_forward",
        [](const std::vector<Matrix>& V, const Matrix& X, const Vector& y, const std::string& h1,
           const std::string& h2) {
            const ResCache c = resnet_forward(to_resnet(V, h1, h2), to_dataset(X, y));
            return py::make_tuple(c.beta, c.output, skip_perturbation(c));
        },
        py::arg("weights"), py::arg("X"), py::arg("y"), py::arg("h1") = "tanh", py::arg("h2") = "tanh",
        "Residual streams beta[0..L], outputs and skip perturbation of a residual net.");

    m.def(
        "train_resnet",
        [](const std::vector<Matrix>& V, const Matrix& X, const Vector& y, double eta, std::size_t steps,
           const std::string& h1, const std::string& h2, const std::string& loss, const std::string& integrator) {
            const ResTrajectory t = evolve(to_resnet(V, h1, h2), to_dataset(X, y), Loss::parse(loss), eta, steps,
                                           parse_integrator(integrator));
            return py::make_tuple(t.net.V, records_to_py(t.records));
        },
        py::arg("weights"), py::arg("X"), py::arg("y"), py::arg("eta"), py::arg("steps"), py::arg("h1") = "tanh",
        py::arg("h2") = "tanh", py::arg("loss") = "pseudo_huber", py::arg("integrator") = "euler",
        "Scaled gradient descent on a residual net; returns the final weights and run records.");

    m.def(
        "gram_chain",
        [](const Matrix& X, double sigma1, Index L, const std::string& act) {
            return gram_chain(to_dataset(X, Vector::Zero(X.rows())), sigma1, Activation::parse(act), L).K;
        },
        py::arg("X"), py::arg("sigma1"), py::arg("L"), py::arg("activation") = "tanh",
        "Analytic Gram matrices K_0..K_{L-1} of the limiting feature law.");

    m.def(
        "init_dnn",
        [](const Matrix& X, const Vector& y, const std::vector<Index>& hidden, double sigma1, std::uint64_t seed,
           const std::string& scheme, const std::string& act, double C3) {
            const Dataset data = to_dataset(X, y);
            const Activation a = Activation::parse(act);
            if (scheme == "standard") return init_dnn_standard(data, hidden, sigma1, seed, a, C3).net.W;
            if (scheme == "regression") return init_dnn_regression(data, hidden, sigma1, C3, seed, a).net.W;
            if (scheme == "fixed_variance") return init_dnn_fixed_variance(data, hidden, sigma1, seed, a).net.W;
            throw InvalidArgument("unknown initialization scheme: " + scheme);
        },
        py::arg("X"), py::arg("y"), py::arg("hidden"), py::arg("sigma1") = 1.0, py::arg("seed") = 0,
        py::arg("scheme") = "regression", py::arg("activation") = "tanh", py::arg("C3") = 1.0,
        "Deep-net weights from the standard, regression or fixed-variance initialization.");

    m.def(
        "init_resnet",
        [](const Matrix& X, const Vector& y, Index width, Index L, double sigma1, std::uint64_t seed,
           const std::string& scheme, const std::string& act, double C5) {
            const Dataset data = to_dataset(X, y);
            const Activation a = Activation::parse(act);
            if (scheme == "zero") return init_resnet_zero(data, width, L, sigma1, C5, seed, a, a).net.V;
            if (scheme == "standard") return init_resnet_standard(data, width, L, sigma1, C5, seed, a, a).net.V;
            if (scheme == "regression") return init_resnet_regression(data, width, L, sigma1, C5, seed, a, a).net.V;
            throw InvalidArgument("unknown initialization scheme: " + scheme);
        },
        py::arg("X"), py::arg("y"), py::arg("width"), py::arg("L"), py::arg("sigma1") = 1.0, py::arg("seed") = 0,
        py::arg("scheme") = "regression", py::arg("activation") = "tanh", py::arg("C5") = 1.0,
        "Residual-net weights from the zero, standard or regression initialization.");

    m.def(
        "eps1_dnn",
        [](const Matrix& X, const Vector& y, const std::vector<Index>& hidden, double sigma1, std::uint64_t seed,
           const std::string& act) {
            const Dataset data = to_dataset(X, y);
            const Activation a = Activation::parse(act);
            const DnnInit init = init_dnn_regression(data, hidden, sigma1, 1.0, seed, a);
            const GramChain chain = gram_chain(data, sigma1, a, static_cast<Index>(hidden.size()));
            const Eps1Report r = eps1_audit_dnn(init, construct_ideal_dnn(data, init, chain));
            return py::dict(py::arg("eps1") = r.eps1, py::arg("first") = r.first, py::arg("middle") = r.middle,
                            py::arg("last") = r.last, py::arg("particles") = r.particles);
        },
        py::arg("X"), py::arg("y"), py::arg("hidden"), py::arg("sigma1") = 1.0, py::arg("seed") = 0,
        py::arg("activation") = "tanh", "Audited closeness of a regression initialization to its ideal coupling.");

    m.def(
        "run_study",
        [](const std::string& study, std::optional<std::string> config_json) {
            const ExperimentConfig c = study_config(study, config_json);
            StudyReport report;
            {
                py::gil_scoped_release release;
                if (study == "degeneracy") report = run_degeneracy(c);
                else if (study == "gram") report = run_gram(c);
                else if (study == "eps1_dnn") report = run_eps1(c, Family::dnn);
                else if (study == "eps1_resnet") report = run_eps1(c, Family::resnet);
                else if (study == "refine") report = run_refine(c);
                else if (study == "converge") report = run_converge(c);
                else if (study == "audit") report = run_audit(c);
                else throw InvalidArgument("unknown study: " + study);
            }
            return report_to_py(report);
        },
        py::arg("study"), py::arg("config_json") = py::none(),
        "Runs a study from its default configuration or a JSON configuration.");

    m.def(
        "default_config", [](const std::string& study) { return dump_config(default_config(study)); },
        py::arg("study"), "Default configuration of a study as JSON text.");
}
