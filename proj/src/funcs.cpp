#include "mfnet/funcs.hpp"

#include <algorithm>
#include <cstdlib>
#include <numbers>
#include <optional>

#include "mfnet/errors.hpp"

namespace mfnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Splits "name(arg)" into name and optional numeric argument.
std::pair<std::string, std::optional<double>> split_id(std::string_view id) {
    const auto open = id.find('(');
    if (open == std::string_view::npos) return {std::string(id), std::nullopt};
    if (id.back() != ')') throw InvalidArgument("malformed id '" + std::string(id) + "'");
    const std::string arg(id.substr(open + 1, id.size() - open - 2));
    char* end = nullptr;
    const double v = std::strtod(arg.c_str(), &end);
    if (end == arg.c_str() || *end != '\0')
        throw InvalidArgument("malformed argument in '" + std::string(id) + "'");
    return {std::string(id.substr(0, open)), v};
}

std::string with_param(const std::string& name, double p) {
    return name + "(" + format_number(p) + ")";
}

Vector linspace(const AuditGrid& g, double scale) {
    return Vector::LinSpaced(g.points, g.lo * scale, g.hi * scale);
}

bool within(double estimate, double declared) {
    return std::isfinite(declared) && estimate <= declared * (1.0 + 1e-9) + 1e-15;
}

double ratio(double big, double small) {
    if (!std::isfinite(big)) return kInf;
    if (small <= 0.0) return big <= 0.0 ? 1.0 : kInf;
    return big / small;
}

struct ActivationEstimates {
    double L1 = 0.0, L2 = 0.0, L3 = 0.0;
};

ActivationEstimates estimate(const Activation& a, const Vector& xs) {
    ActivationEstimates e;
    double prev_x = xs(0);
    double prev_d = a.prime(prev_x);
    for (Index k = 0; k < xs.size(); ++k) {
        const double x = xs(k);
        const double d = a.prime(x);
        e.L1 = std::max(e.L1, std::abs(a(x)));
        e.L2 = std::max(e.L2, std::abs(d));
        if (k > 0) e.L3 = std::max(e.L3, std::abs(d - prev_d) / (x - prev_x));
        prev_x = x;
        prev_d = d;
    }
    return e;
}

struct LossEstimates {
    double L4 = 0.0, L5 = 0.0;
};

LossEstimates estimate(const Loss& l, const Vector& xs, const Vector& ys) {
    LossEstimates e;
    for (Index j = 0; j < ys.size(); ++j) {
        const double y = ys(j);
        double prev = l.prime1(xs(0), y);
        e.L4 = std::max(e.L4, std::abs(prev));
        for (Index k = 1; k < xs.size(); ++k) {
            const double d = l.prime1(xs(k), y);
            e.L4 = std::max(e.L4, std::abs(d));
            e.L5 = std::max(e.L5, std::abs(d - prev) / (xs(k) - xs(k - 1)));
            prev = d;
        }
    }
    return e;
}

Vector label_grid(const Loss& l, const AuditGrid& g, double scale) {
    if (l.kind() == LossKind::logistic) return Vector{{-1.0, 1.0}};
    return linspace(g, scale);
}

} // namespace

// ---------------------------------------------------------------------------
// Activation

Activation Activation::scaled_tanh(double c) {
    if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("scaled_tanh: c must be > 0");
    return Activation(ActivationKind::scaled_tanh, c);
}

Activation Activation::bounded_softplus(double b) {
    if (!(b > 0.0) || !std::isfinite(b)) throw InvalidArgument("bounded_softplus: b must be > 0");
    return Activation(ActivationKind::bounded_softplus, b);
}

Activation Activation::parse(std::string_view id) {
    const auto [name, arg] = split_id(id);
    if (name == "tanh" && !arg) return tanh();
    if (name == "scaled_tanh" && arg) return scaled_tanh(*arg);
    if (name == "bounded_softplus") return bounded_softplus(arg.value_or(1.0));
    if (name == "identity" && !arg) return identity();
    if (name == "zero" && !arg) return zero();
    throw InvalidArgument("unknown activation '" + std::string(id) + "'");
}

std::string Activation::id() const {
    switch (kind_) {
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::scaled_tanh: return with_param("scaled_tanh", param_);
    case ActivationKind::bounded_softplus: return with_param("bounded_softplus", param_);
    case ActivationKind::identity: return "identity";
    case ActivationKind::zero: return "zero";
    }
    return "unknown";
}

double Activation::second(double x) const {
    switch (kind_) {
    case ActivationKind::tanh: {
        const double t = std::tanh(x);
        return -2.0 * t * (1.0 - t * t);
    }
    case ActivationKind::scaled_tanh: {
        const double t = std::tanh(param_ * x);
        return -2.0 * param_ * param_ * t * (1.0 - t * t);
    }
    case ActivationKind::bounded_softplus: {
        const double s0 = sigmoid(x);
        const double s1 = sigmoid(x - param_);
        return s0 * (1.0 - s0) - s1 * (1.0 - s1);
    }
    case ActivationKind::identity:
    case ActivationKind::zero: return 0.0;
    }
    return 0.0;
}

// max |d^2/dx^2 tanh| = 4 / (3 sqrt 3), attained at tanh(x) = 1/sqrt(3)
static constexpr double kTanhCurvature = 4.0 / (3.0 * std::numbers::sqrt3);

double Activation::declared_L1() const {
    switch (kind_) {
    case ActivationKind::tanh:
    case ActivationKind::scaled_tanh: return 1.0;
    case ActivationKind::bounded_softplus: return param_;
    case ActivationKind::identity: return kInf;
    case ActivationKind::zero: return 0.0;
    }
    return kInf;
}

double Activation::declared_L2() const {
    switch (kind_) {
    case ActivationKind::tanh: return 1.0;
    case ActivationKind::scaled_tanh: return param_;
    case ActivationKind::bounded_softplus: return std::tanh(param_ / 4.0);
    case ActivationKind::identity: return 1.0;
    case ActivationKind::zero: return 0.0;
    }
    return kInf;
}

double Activation::declared_L3() const {
    switch (kind_) {
    case ActivationKind::tanh: return kTanhCurvature;
    case ActivationKind::scaled_tanh: return param_ * param_ * kTanhCurvature;
    case ActivationKind::bounded_softplus: return 0.25;
    case ActivationKind::identity:
    case ActivationKind::zero: return 0.0;
    }
    return kInf;
}

// ---------------------------------------------------------------------------
// Loss

Loss Loss::pseudo_huber(double delta) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw InvalidArgument("pseudo_huber: delta must be > 0");
    return Loss(LossKind::pseudo_huber, delta);
}

Loss Loss::parse(std::string_view id) {
    const auto [name, arg] = split_id(id);
    if (name == "pseudo_huber") return pseudo_huber(arg.value_or(1.0));
    if (name == "squared" && !arg) return squared();
    if (name == "logistic" && !arg) return logistic();
    throw InvalidArgument("unknown loss '" + std::string(id) + "'");
}

std::string Loss::id() const {
    switch (kind_) {
    case LossKind::pseudo_huber: return param_ == 1.0 ? "pseudo_huber" : with_param("pseudo_huber", param_);
    case LossKind::squared: return "squared";
    case LossKind::logistic: return "logistic";
    }
    return "unknown";
}

double Loss::second1(double x, double y) const {
    switch (kind_) {
    case LossKind::pseudo_huber: {
        const double q = (x - y) / param_;
        return std::pow(1.0 + q * q, -1.5);
    }
    case LossKind::squared: return 2.0;
    case LossKind::logistic: {
        const double s = Activation::sigmoid(-x * y);
        return y * y * s * (1.0 - s);
    }
    }
    return 0.0;
}

double Loss::declared_L4() const {
    switch (kind_) {
    case LossKind::pseudo_huber: return param_;
    case LossKind::squared: return kInf;
    case LossKind::logistic: return 1.0;
    }
    return kInf;
}

double Loss::declared_L5() const {
    switch (kind_) {
    case LossKind::pseudo_huber: return 1.0;
    case LossKind::squared: return 2.0;
    case LossKind::logistic: return 0.25;
    }
    return kInf;
}

// ---------------------------------------------------------------------------
// Elementwise evaluation

Matrix h_eval(const Activation& a, const Matrix& x) {
    return x.unaryExpr([&a](double v) { return a(v); });
}

Vector h_eval(const Activation& a, const Vector& x) {
    return x.unaryExpr([&a](double v) { return a(v); });
}

Matrix h_prime(const Activation& a, const Matrix& x) {
    return x.unaryExpr([&a](double v) { return a.prime(v); });
}

Vector h_prime(const Activation& a, const Vector& x) {
    return x.unaryExpr([&a](double v) { return a.prime(v); });
}

double phi_eval(const Loss& l, double x, double y) { return l(x, y); }

double phi_prime1(const Loss& l, double x, double y) { return l.prime1(x, y); }

// ---------------------------------------------------------------------------
// Audits

AuditRecord assumption_audit(const Activation& a, const AuditGrid& grid) {
    if (grid.points < 1000 || !(grid.hi > grid.lo))
        throw InvalidArgument("assumption_audit: grid needs >= 1000 points on a non-empty range");

    const auto e = estimate(a, linspace(grid, 1.0));
    const auto wide = estimate(a, linspace(grid, 2.0));

    AuditRecord r;
    r.id = a.id();
    r.L1 = e.L1;
    r.L2 = e.L2;
    r.L3 = e.L3;
    r.declared_L1 = a.declared_L1();
    r.declared_L2 = a.declared_L2();
    r.declared_L3 = a.declared_L3();
    r.growth = std::max({ratio(wide.L1, e.L1), ratio(wide.L2, e.L2), ratio(wide.L3, e.L3)});
    r.compliant = within(e.L1, r.declared_L1) && within(e.L2, r.declared_L2) &&
                  within(e.L3, r.declared_L3);
    return r;
}

AuditRecord assumption_audit(const Loss& l, const AuditGrid& grid) {
    if (grid.points < 1000 || !(grid.hi > grid.lo))
        throw InvalidArgument("assumption_audit: grid needs >= 1000 points on a non-empty range");

    const auto e = estimate(l, linspace(grid, 1.0), label_grid(l, grid, 1.0));
    const auto wide = estimate(l, linspace(grid, 2.0), label_grid(l, grid, 2.0));

    AuditRecord r;
    r.id = l.id();
    r.L4 = e.L4;
    r.L5 = e.L5;
    r.declared_L4 = l.declared_L4();
    r.declared_L5 = l.declared_L5();
    r.growth = std::max(ratio(wide.L4, e.L4), ratio(wide.L5, e.L5));
    r.compliant = within(e.L4, r.declared_L4) && within(e.L5, r.declared_L5);
    return r;
}

} // namespace mfnet
