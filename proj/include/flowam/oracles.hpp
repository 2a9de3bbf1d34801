#pragma once

#include "flowam/field.hpp"
#include "flowam/types.hpp"

#include <utility>

namespace flowam {

// 1D rectified flow between X_0 ~ N(mu, sigma^2) and X_1 ~ N(0, 1), independent.
// X_t ~ N(m(t), D(t)) with m = (1-t) mu and D = (1-t)^2 sigma^2 + t^2.
struct GaussianFlowSpec {
    double mu = 0.0;
    double sigma = 1.0;

    double m(double t) const { return (1.0 - t) * mu; }
    double D(double t) const { return (1.0 - t) * (1.0 - t) * sigma * sigma + t * t; }
};

// v(x,t) = E[X_1 - X_0 | X_t = x] = A(t) x + B(t)
double rf_slope(const GaussianFlowSpec& spec, double t);  // A(t) = (t - (1-t) sigma^2) / D(t)
double rf_velocity(const GaussianFlowSpec& spec, double x, double t);
// Lean adjoint of the flow above: a(t) = a1 / sqrt(D(t)).
double rf_adjoint(const GaussianFlowSpec& spec, double a1, double t);
// argmin of D, where the control norm peaks: sigma^2 / (1 + sigma^2)
double rf_peak_time(const GaussianFlowSpec& spec);
// |u*_t| / max_s |u*_s| under f(r) = r^p/(p lambda)
double rf_relative_strength(const GaussianFlowSpec& spec, double p, double t);

// The rectified-flow field as a VectorField (state_dim 1) so numeric integrators can run on it.
class RfVelocityField final : public VectorField {
  public:
    explicit RfVelocityField(GaussianFlowSpec spec) : spec_(spec) {}
    int state_dim() const override { return 1; }
    Vec velocity(const Vec& x, double t, CondLabel) const override;
    Vec input_vjp(const Vec& x, double t, CondLabel, const Vec& w) const override;

  private:
    GaussianFlowSpec spec_;
};

enum class ToyKind { VE, VP };

struct ToyDiffusionSpec {
    ToyKind kind = ToyKind::VE;
    double T = 1.0;
    double eta = 1.0;
};

// Time-aware control component c*(t) of the VE / VP toy diffusions:
//   VE: eta sqrt(2(T-t)) (1 + (T-t)^2)^{-(1+eta^2)/2}
//   VP: eta sqrt(2(T-t)) exp(-eta^2 (T-t)^2 / 2)
double toy_control_component(const ToyDiffusionSpec& spec, double t);
// Closed-form maximisers, clamped to [0, T]: VE T - 1/sqrt(1+2 eta^2), VP T - 1/(sqrt(2) eta).
double toy_argmax(const ToyDiffusionSpec& spec);

// Score of the symmetric mixture (N(-mu,1) + N(mu,1))/2 diffused to time t (variance 1 + t^2).
double bimodal_score(double mu, double t, double x);

struct GaussianMoments {
    double mean = 0.0;
    double variance = 1.0;
};
// N(0,1) tilted by exp(-(c/2)(x-m)^2). DomainError if c <= -1.
GaussianMoments tilted_gaussian(double c, double m);

}  // namespace flowam
