#include "flowam/schedules.hpp"

#include "flowam/errors.hpp"

#include <cmath>
#include <numbers>

namespace flowam {

namespace {

void check_unit_interval(double t, const char* what) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError(std::string(what) + ": t=" + std::to_string(t) + " outside [0,1]");
}

double clamp_time(double t, double t_floor) { return t < t_floor ? t_floor : t; }

}  // namespace

InterpolantSchedule InterpolantSchedule::linear() {
    InterpolantSchedule s;
    s.kind_ = ScheduleKind::Linear;
    return s;
}

InterpolantSchedule InterpolantSchedule::custom(ScalarFn alpha, ScalarFn beta, ScalarFn alpha_dot, ScalarFn beta_dot) {
    if (!alpha || !beta || !alpha_dot || !beta_dot) throw ConfigError("custom schedule: all four functions required");
    constexpr double tol = 1e-12;
    if (std::abs(alpha(0.0)) > tol || std::abs(alpha(1.0) - 1.0) > tol || std::abs(beta(0.0) - 1.0) > tol ||
        std::abs(beta(1.0)) > tol)
        throw ConfigError("custom schedule violates alpha(0)=0, alpha(1)=1, beta(0)=1, beta(1)=0");
    InterpolantSchedule s;
    s.kind_ = ScheduleKind::Custom;
    s.alpha_ = std::move(alpha);
    s.beta_ = std::move(beta);
    s.alpha_dot_ = std::move(alpha_dot);
    s.beta_dot_ = std::move(beta_dot);
    return s;
}

double InterpolantSchedule::alpha(double t) const { return kind_ == ScheduleKind::Linear ? t : alpha_(t); }
double InterpolantSchedule::beta(double t) const { return kind_ == ScheduleKind::Linear ? 1.0 - t : beta_(t); }
double InterpolantSchedule::alpha_dot(double t) const { return kind_ == ScheduleKind::Linear ? 1.0 : alpha_dot_(t); }
double InterpolantSchedule::beta_dot(double t) const { return kind_ == ScheduleKind::Linear ? -1.0 : beta_dot_(t); }

DriftCoefficients drift_coefficients(const InterpolantSchedule& sched, double t, double t_floor) {
    check_unit_interval(t, "drift_coefficients");
    const double tc = clamp_time(t, t_floor);
    const double a = sched.alpha(tc);
    if (a == 0.0) throw SingularityError("drift_coefficients: alpha(t)=0 at t=" + std::to_string(tc));
    const double b = sched.beta(tc);
    DriftCoefficients d;
    d.t = tc;
    d.kappa = sched.alpha_dot(tc) / a;
    d.eta = b * (d.kappa * b - sched.beta_dot(tc));
    return d;
}

Vec to_velocity(Parameterization param, const Vec& value, const Vec& x, double t, const InterpolantSchedule& sched) {
    if (value.size() != x.size()) throw ShapeError("to_velocity: value and x differ in dimension");
    switch (param) {
        case Parameterization::Velocity:
            return value;
        case Parameterization::Score: {
            const auto d = drift_coefficients(sched, t);
            return d.kappa * x + d.eta * value;
        }
        case Parameterization::Noise: {
            const auto d = drift_coefficients(sched, t);
            return d.kappa * x - (d.kappa * sched.beta(d.t) - sched.beta_dot(d.t)) * value;
        }
        case Parameterization::CleanData: {
            check_unit_interval(t, "to_velocity");
            const double tc = clamp_time(t, kTimeFloor);
            const double b = sched.beta(tc);
            if (b == 0.0) throw SingularityError("to_velocity: beta(t)=0 at t=" + std::to_string(tc));
            const double ratio = sched.beta_dot(tc) / b;
            return ratio * x - (ratio * sched.alpha(tc) - sched.alpha_dot(tc)) * value;
        }
    }
    throw ConfigError("to_velocity: unknown parameterization");
}

Vec velocity_to_score(const Vec& v, const Vec& x, double t, const InterpolantSchedule& sched) {
    if (v.size() != x.size()) throw ShapeError("velocity_to_score: v and x differ in dimension");
    const auto d = drift_coefficients(sched, t);
    if (d.eta == 0.0) throw SingularityError("velocity_to_score: eta(t)=0 at t=" + std::to_string(d.t));
    return (v - d.kappa * x) / d.eta;
}

double sigma(const NoiseSchedule& ns, double t, const InterpolantSchedule& sched, double t_floor) {
    check_unit_interval(t, "sigma");
    switch (ns.kind) {
        case NoiseKind::Memoryless: {
            const double eta = drift_coefficients(sched, t, t_floor).eta;
            return std::sqrt(2.0 * std::max(eta, 0.0));
        }
        case NoiseKind::SinSq: {
            const double s = std::sin(std::numbers::pi * t);
            return s * s;
        }
        case NoiseKind::OneMinusT:
            return 1.0 - t;
        case NoiseKind::SigmaT:
            return std::max(sched.beta(t), 0.0);
        case NoiseKind::Zero:
            return 0.0;
        case NoiseKind::Custom: {
            if (!ns.custom) throw ConfigError("custom noise schedule without a function");
            const double s = ns.custom(t);
            if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("custom noise schedule returned invalid sigma");
            return s;
        }
    }
    throw ConfigError("sigma: unknown noise kind");
}

InterpolantSchedule schedule_from_key(std::string_view key) {
    if (key == "linear") return InterpolantSchedule::linear();
    throw ConfigError("unknown schedule '" + std::string(key) + "' (expected: linear)");
}

NoiseSchedule noise_from_key(std::string_view key) {
    if (key == "memoryless") return NoiseSchedule::of(NoiseKind::Memoryless);
    if (key == "sin2") return NoiseSchedule::of(NoiseKind::SinSq);
    if (key == "one_minus_t") return NoiseSchedule::of(NoiseKind::OneMinusT);
    if (key == "sigma_t") return NoiseSchedule::of(NoiseKind::SigmaT);
    if (key == "zero") return NoiseSchedule::of(NoiseKind::Zero);
    throw ConfigError("unknown noise schedule '" + std::string(key) +
                      "' (expected: memoryless, sin2, one_minus_t, sigma_t, zero)");
}

std::string noise_key(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::Memoryless: return "memoryless";
        case NoiseKind::SinSq: return "sin2";
        case NoiseKind::OneMinusT: return "one_minus_t";
        case NoiseKind::SigmaT: return "sigma_t";
        case NoiseKind::Zero: return "zero";
        case NoiseKind::Custom: return "custom";
    }
    return "custom";
}

}  // namespace flowam
