#include "flowam/oracles.hpp"

#include "flowam/errors.hpp"

#include <algorithm>
#include <cmath>

namespace flowam {

double rf_slope(const GaussianFlowSpec& spec, double t) {
    const double s2 = spec.sigma * spec.sigma;
    return (t - (1.0 - t) * s2) / spec.D(t);
}

double rf_velocity(const GaussianFlowSpec& spec, double x, double t) {
    const double a = rf_slope(spec, t);
    return a * x - spec.mu - a * spec.m(t);
}

double rf_adjoint(const GaussianFlowSpec& spec, double a1, double t) { return a1 / std::sqrt(spec.D(t)); }

double rf_peak_time(const GaussianFlowSpec& spec) {
    const double s2 = spec.sigma * spec.sigma;
    return s2 / (1.0 + s2);
}

double rf_relative_strength(const GaussianFlowSpec& spec, double p, double t) {
    if (!(p > 1.0)) throw DomainError("rf_relative_strength: p must be > 1");
    const double s2 = spec.sigma * spec.sigma;
    return std::pow(s2 / (spec.D(t) * (1.0 + s2)), 1.0 / (2.0 * p - 2.0));
}

Vec RfVelocityField::velocity(const Vec& x, double t, CondLabel) const {
    if (x.size() != 1) throw ShapeError("rf field: state must be 1D");
    return Vec::Constant(1, rf_velocity(spec_, x(0), t));
}

Vec RfVelocityField::input_vjp(const Vec& x, double t, CondLabel, const Vec& w) const {
    if (x.size() != 1 || w.size() != 1) throw ShapeError("rf field: state must be 1D");
    return rf_slope(spec_, t) * w;
}

double toy_control_component(const ToyDiffusionSpec& spec, double t) {
    if (!(spec.T > 0.0)) throw DomainError("toy diffusion: T must be > 0");
    if (t < 0.0 || t > spec.T) throw DomainError("toy diffusion: t outside [0, T]");
    const double s = spec.T - t;
    const double e2 = spec.eta * spec.eta;
    const double lead = spec.eta * std::sqrt(2.0 * s);
    if (spec.kind == ToyKind::VE) return lead * std::pow(1.0 + s * s, -0.5 * (1.0 + e2));
    return lead * std::exp(-0.5 * e2 * s * s);
}

double toy_argmax(const ToyDiffusionSpec& spec) {
    if (!(spec.eta > 0.0)) throw DomainError("toy diffusion: argmax needs eta > 0");
    const double s = spec.kind == ToyKind::VE ? 1.0 / std::sqrt(1.0 + 2.0 * spec.eta * spec.eta)
                                              : 1.0 / (std::sqrt(2.0) * spec.eta);
    return std::clamp(spec.T - s, 0.0, spec.T);
}

double bimodal_score(double mu, double t, double x) {
    const double v = 1.0 + t * t;
    return (-x + mu * std::tanh(mu * x / v)) / v;
}

GaussianMoments tilted_gaussian(double c, double m) {
    if (!(c > -1.0)) throw DomainError("tilted_gaussian: curvature must exceed -1");
    return {c * m / (1.0 + c), 1.0 / (1.0 + c)};
}

}  // namespace flowam
