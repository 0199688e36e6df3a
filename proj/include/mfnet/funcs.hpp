#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "mfnet/config_io.hpp"

namespace mfnet {

enum class ActivationKind { tanh, scaled_tanh, bounded_softplus, identity, zero };

/// Smooth scalar activation with declared regularity constants:
/// sup|h| <= L1, sup|h'| <= L2, h' is L3-Lipschitz.
class Activation {
public:
    Activation() = default;

    static Activation tanh() { return Activation(ActivationKind::tanh, 1.0); }
    static Activation scaled_tanh(double c);
    static Activation bounded_softplus(double b = 1.0);
    // Test-only members: identity violates boundedness, zero is degenerate.
    static Activation identity() { return Activation(ActivationKind::identity, 0.0); }
    static Activation zero() { return Activation(ActivationKind::zero, 0.0); }

    /// Accepts "tanh", "scaled_tanh(c)", "bounded_softplus", "bounded_softplus(b)",
    /// "identity", "zero".
    static Activation parse(std::string_view id);

    ActivationKind kind() const { return kind_; }
    double param() const { return param_; }
    std::string id() const;

    double operator()(double x) const {
        switch (kind_) {
        case ActivationKind::tanh: return std::tanh(x);
        case ActivationKind::scaled_tanh: return std::tanh(param_ * x);
        case ActivationKind::bounded_softplus: return softplus(x) - softplus(x - param_);
        case ActivationKind::identity: return x;
        case ActivationKind::zero: return 0.0;
        }
        return 0.0;
    }

    double prime(double x) const {
        switch (kind_) {
        case ActivationKind::tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case ActivationKind::scaled_tanh: {
            const double t = std::tanh(param_ * x);
            return param_ * (1.0 - t * t);
        }
        case ActivationKind::bounded_softplus: return sigmoid(x) - sigmoid(x - param_);
        case ActivationKind::identity: return 1.0;
        case ActivationKind::zero: return 0.0;
        }
        return 0.0;
    }

    double second(double x) const;

    double declared_L1() const;
    double declared_L2() const;
    double declared_L3() const;

    bool test_only() const {
        return kind_ == ActivationKind::identity || kind_ == ActivationKind::zero;
    }

    static double softplus(double x) {
        return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }
    static double sigmoid(double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

private:
    Activation(ActivationKind kind, double param) : kind_(kind), param_(param) {}

    ActivationKind kind_ = ActivationKind::tanh;
    double param_ = 1.0;
};

enum class LossKind { pseudo_huber, squared, logistic };

/// Loss phi(x, y) in the prediction x, with first-argument derivative.
class Loss {
public:
    Loss() = default;

    static Loss pseudo_huber(double delta = 1.0);
    static Loss squared() { return Loss(LossKind::squared, 0.0); }
    static Loss logistic() { return Loss(LossKind::logistic, 0.0); }

    /// Accepts "pseudo_huber", "pseudo_huber(delta)", "squared", "logistic".
    static Loss parse(std::string_view id);

    LossKind kind() const { return kind_; }
    double param() const { return param_; }
    std::string id() const;

    double operator()(double x, double y) const {
        const double r = x - y;
        switch (kind_) {
        case LossKind::pseudo_huber: {
            const double q = r / param_;
            return param_ * param_ * (std::sqrt(1.0 + q * q) - 1.0);
        }
        case LossKind::squared: return r * r;
        case LossKind::logistic: return Activation::softplus(-x * y);
        }
        return 0.0;
    }

    double prime1(double x, double y) const {
        const double r = x - y;
        switch (kind_) {
        case LossKind::pseudo_huber: {
            const double q = r / param_;
            return r / std::sqrt(1.0 + q * q);
        }
        case LossKind::squared: return 2.0 * r;
        case LossKind::logistic: return -y * Activation::sigmoid(-x * y);
        }
        return 0.0;
    }

    double second1(double x, double y) const;

    double declared_L4() const;
    double declared_L5() const;

    /// Bounded, Lipschitz first-argument derivative.
    bool compliant() const { return std::isfinite(declared_L4()) && std::isfinite(declared_L5()); }

private:
    Loss(LossKind kind, double param) : kind_(kind), param_(param) {}

    LossKind kind_ = LossKind::pseudo_huber;
    double param_ = 1.0;
};

Matrix h_eval(const Activation& a, const Matrix& x);
Vector h_eval(const Activation& a, const Vector& x);
Matrix h_prime(const Activation& a, const Matrix& x);
Vector h_prime(const Activation& a, const Vector& x);

double phi_eval(const Loss& l, double x, double y);
double phi_prime1(const Loss& l, double x, double y);

struct AuditGrid {
    double lo = -10.0;
    double hi = 10.0;
    Index points = 2001;
};

/// Grid estimates of the regularity constants. Entries that do not apply to
/// the audited object are NaN. `growth` is the ratio of the largest estimate
/// on the doubled range to the one on the given range.
struct AuditRecord {
    std::string id;
    double L1 = std::numeric_limits<double>::quiet_NaN();
    double L2 = std::numeric_limits<double>::quiet_NaN();
    double L3 = std::numeric_limits<double>::quiet_NaN();
    double L4 = std::numeric_limits<double>::quiet_NaN();
    double L5 = std::numeric_limits<double>::quiet_NaN();
    double declared_L1 = std::numeric_limits<double>::quiet_NaN();
    double declared_L2 = std::numeric_limits<double>::quiet_NaN();
    double declared_L3 = std::numeric_limits<double>::quiet_NaN();
    double declared_L4 = std::numeric_limits<double>::quiet_NaN();
    double declared_L5 = std::numeric_limits<double>::quiet_NaN();
    double growth = 1.0;
    bool compliant = false;
};

/// Compliant when the declared constants are finite and no grid estimate
/// exceeds them.
AuditRecord assumption_audit(const Activation& a, const AuditGrid& grid = {});
AuditRecord assumption_audit(const Loss& l, const AuditGrid& grid = {});

} // namespace mfnet
