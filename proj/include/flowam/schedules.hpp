#pragma once

#include "flowam/types.hpp"

#include <functional>
#include <string>
#include <string_view>

namespace flowam {

// Lower clamp for every schedule query; kappa_t = alpha'_t / alpha_t is singular at t = 0.
inline constexpr double kTimeFloor = 1e-3;

enum class ScheduleKind { Linear, Custom };

// Affine interpolant  X_t = beta_t X_0 + alpha_t X_1  with X_0 noise and X_1 data.
class InterpolantSchedule {
  public:
    using ScalarFn = std::function<double(double)>;

    static InterpolantSchedule linear();
    // Boundary conditions alpha(0)=0, alpha(1)=1, beta(0)=1, beta(1)=0 are checked here.
    static InterpolantSchedule custom(ScalarFn alpha, ScalarFn beta, ScalarFn alpha_dot, ScalarFn beta_dot);

    ScheduleKind kind() const { return kind_; }
    double alpha(double t) const;
    double beta(double t) const;
    double alpha_dot(double t) const;
    double beta_dot(double t) const;

  private:
    InterpolantSchedule() = default;
    ScheduleKind kind_ = ScheduleKind::Linear;
    ScalarFn alpha_, beta_, alpha_dot_, beta_dot_;
};

struct DriftCoefficients {
    double kappa = 0.0;
    double eta = 0.0;
    double t = 0.0;  // the clamped time the coefficients were evaluated at
};

// kappa_t = alpha'/alpha,  eta_t = beta (kappa beta - beta').
// Throws DomainError for t outside [0,1]; t is then clamped to [t_floor, 1].
DriftCoefficients drift_coefficients(const InterpolantSchedule& sched, double t, double t_floor = kTimeFloor);

enum class Parameterization { Velocity, Score, Noise, CleanData };

// Converts a model prediction of the given kind into a velocity.
Vec to_velocity(Parameterization param, const Vec& value, const Vec& x, double t, const InterpolantSchedule& sched);

// Inverse of the score row: s = (v - kappa x) / eta.
Vec velocity_to_score(const Vec& v, const Vec& x, double t, const InterpolantSchedule& sched);

enum class NoiseKind { Memoryless, SinSq, OneMinusT, SigmaT, Zero, Custom };

struct NoiseSchedule {
    NoiseKind kind = NoiseKind::Zero;
    std::function<double(double)> custom;  // only for NoiseKind::Custom

    static NoiseSchedule memoryless() { return {NoiseKind::Memoryless, {}}; }
    static NoiseSchedule zero() { return {NoiseKind::Zero, {}}; }
    static NoiseSchedule of(NoiseKind k) { return {k, {}}; }
};

// Diffusion coefficient sigma(t) >= 0.
//   Memoryless: sqrt(2 eta_t)   SinSq: sin^2(pi t)   OneMinusT: 1 - t
//   SigmaT: beta_t of the interpolant   Zero: 0
double sigma(const NoiseSchedule& ns, double t, const InterpolantSchedule& sched, double t_floor = kTimeFloor);

// Config keys: "linear"; "memoryless" | "sin2" | "one_minus_t" | "sigma_t" | "zero".
InterpolantSchedule schedule_from_key(std::string_view key);
NoiseSchedule noise_from_key(std::string_view key);
std::string noise_key(NoiseKind kind);

}  // namespace flowam
