#include "flowam/control.hpp"

#include "flowam/errors.hpp"

#include <cmath>
#include <random>

namespace flowam {

void RegularizerSpec::validate() const {
    if (!(p > 1.0) || !std::isfinite(p)) throw ConfigError("regularizer: p must be > 1");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("regularizer: lambda must be > 0");
    if (!(eps_adjoint >= 0.0)) throw ConfigError("regularizer: eps_adjoint must be >= 0");
}

double RegularizerSpec::f(double r) const { return std::pow(r, p) / (p * lambda); }
double RegularizerSpec::f_prime(double r) const { return std::pow(r, p - 1.0) / lambda; }

Vec control_from_adjoint(const RegularizerSpec& reg, const Vec& a) {
    const double n = a.norm();
    if (n < reg.eps_adjoint) return Vec::Zero(a.size());
    if (reg.p == 2.0) return -reg.lambda * a;
    const double scale = std::pow(reg.lambda, 1.0 / (reg.p - 1.0)) * std::pow(n, (2.0 - reg.p) / (reg.p - 1.0));
    return -scale * a;
}

double check_pmp_optimality(const RegularizerSpec& reg, const Vec& a, const Vec& u) {
    if (a.size() != u.size()) throw ShapeError("check_pmp_optimality: dimension mismatch");
    const double n = u.norm();
    if (n == 0.0) return a.norm();
    return (reg.f_prime(n) / n * u + a).norm();
}

ControlTarget control_target(const RegularizerSpec& reg, const AdjointTrace& trace) {
    ControlTarget out;
    out.window = trace.window;
    out.targets.reserve(trace.adjoints.size());
    for (const auto& a : trace.adjoints) out.targets.push_back(control_from_adjoint(reg, a));
    return out;
}

double stochastic_loss_coefficient(double sigma, double eta) {
    if (sigma == 0.0) throw SingularityError("stochastic AM: sigma(t) = 0 on the loss window");
    if (eta == 0.0) throw SingularityError("stochastic AM: eta_t = 0 on the loss window");
    return (sigma * sigma + 2.0 * eta) / (2.0 * sigma * eta);
}

namespace {

void check_pair(const VelocityField& theta, const Trajectory& traj, const AdjointTrace& trace) {
    if (traj.terminal().size() != theta.state_dim()) throw ShapeError("am loss: state dimension mismatch");
    if (trace.size() < 1 || trace.last_index() != traj.n_steps() || trace.first_index < 1)
        throw ShapeError("am loss: adjoint trace does not lie on the trajectory grid");
}

// residual r = c * (v_theta - v_base) + b; adds weight*|r|^2 and, with a sink, dL/dv = 2 weight c r.
double residual_term(const VelocityField& theta, const Vec& x, double t, CondLabel cond, const Vec& v_base,
                     double c, const Vec& b, double weight, GradSink* sink) {
    if (sink) {
        GradientTape tape = theta.record(x, t, cond);
        const Vec r = c * (tape.output() - v_base) + b;
        sink->backward(tape, (2.0 * weight * c) * r);
        return weight * r.squaredNorm();
    }
    const Vec r = c * (theta.velocity(x, t, cond) - v_base) + b;
    return weight * r.squaredNorm();
}

void check_batch(const std::vector<Trajectory>& batch, const std::vector<AdjointTrace>& traces) {
    if (batch.empty()) throw ShapeError("am loss: empty batch");
    if (batch.size() != traces.size()) throw ShapeError("am loss: one adjoint trace per trajectory required");
}

}  // namespace

double am_term_deterministic(const VelocityField& theta, const VectorField& base, const Trajectory& traj,
                             const AdjointTrace& trace, const RegularizerSpec& reg, double weight, GradSink* sink) {
    check_pair(theta, traj, trace);
    double loss = 0.0;
    for (int k = loss_window_begin(trace); k < loss_window_end(trace); ++k) {
        const Vec& x = traj.states[k];
        const double t = traj.times[k];
        const Vec target = control_from_adjoint(reg, trace.at_grid(k + 1));
        loss += residual_term(theta, x, t, traj.cond, base.velocity(x, t, traj.cond), 1.0, -target, weight, sink);
    }
    return loss;
}

double am_term_stochastic(const VelocityField& theta, const VectorField& base, const InterpolantSchedule& sched,
                          const NoiseSchedule& ns, const Trajectory& traj, const AdjointTrace& trace,
                          const RegularizerSpec& reg, double weight, GradSink* sink) {
    if (reg.p != 2.0) throw ConfigError("stochastic AM supports only the quadratic penalty (p = 2)");
    check_pair(theta, traj, trace);
    const double h = traj.step();
    double loss = 0.0;
    for (int k = loss_window_begin(trace); k < loss_window_end(trace); ++k) {
        const Vec& x = traj.states[k];
        const double t = traj.times[k];
        const SdeCoefficients sc = sde_coefficients(sched, ns, t, h);
        const double c = stochastic_loss_coefficient(sc.sigma, sc.eta);
        const Vec b = (reg.lambda * sc.sigma) * trace.at_grid(k + 1);
        loss += residual_term(theta, x, t, traj.cond, base.velocity(x, t, traj.cond), c, b, weight, sink);
    }
    return loss;
}

double draft_term(const VelocityField& theta, const Trajectory& traj, const RewardFn& reward, int k, double weight,
                  GradSink* sink) {
    const int n = traj.n_steps();
    if (k < 1 || k > n) throw ShapeError("draft: k must lie in [1, N]");
    const double h = traj.step();
    Vec x = traj.states[n - k];
    if (!sink) {
        for (int j = n - k; j < n; ++j) x = x + h * theta.velocity(x, traj.times[j], traj.cond);
        return -weight * reward.value(x);
    }
    std::vector<GradientTape> tapes;
    tapes.reserve(k);
    for (int j = n - k; j < n; ++j) {
        tapes.push_back(theta.record(x, traj.times[j], traj.cond));
        x = x + h * tapes.back().output();
    }
    // g_j = dL/dX_j, pulled back through X_{j+1} = X_j + h v_theta(X_j, t_j)
    Vec g = -weight * reward.gradient(x);
    for (int i = k - 1; i >= 0; --i) g = g + sink->backward(tapes[i], h * g);
    return -weight * reward.value(x);
}

double refl_term(const VelocityField& theta, const Trajectory& traj, const RewardFn& reward, int step_index,
                 double weight, GradSink* sink) {
    const int n = traj.n_steps();
    if (step_index < 0 || step_index >= n) throw ShapeError("refl: step index outside [0, N)");
    const Vec& x = traj.states[step_index];
    const double t = traj.times[step_index];
    const double lead = 1.0 - t;
    if (!sink) return -weight * reward.value(x + lead * theta.velocity(x, t, traj.cond));
    GradientTape tape = theta.record(x, t, traj.cond);
    const Vec x1 = x + lead * tape.output();
    sink->backward(tape, (-weight * lead) * reward.gradient(x1));
    return -weight * reward.value(x1);
}

int refl_pick_step(Rng& rng, int n_steps, int k_window) {
    if (k_window < 1 || k_window > n_steps) throw ShapeError("refl: k_window must lie in [1, N]");
    std::uniform_int_distribution<int> pick(n_steps - k_window, n_steps - 1);
    return pick(rng);
}

LossAndGrad am_loss_deterministic(const VelocityField& theta, const VectorField& base,
                                  const std::vector<Trajectory>& batch, const std::vector<AdjointTrace>& traces,
                                  const RegularizerSpec& reg) {
    check_batch(batch, traces);
    const double w = 1.0 / (static_cast<double>(batch.size()) * traces.front().size());
    return batched_param_grad(theta, batch.size(), [&](std::size_t i, GradSink& sink) {
        return am_term_deterministic(theta, base, batch[i], traces[i], reg, w, &sink);
    });
}

LossAndGrad am_loss_stochastic(const VelocityField& theta, const VectorField& base, const InterpolantSchedule& sched,
                               const NoiseSchedule& ns, const std::vector<Trajectory>& batch,
                               const std::vector<AdjointTrace>& traces, const RegularizerSpec& reg) {
    if (reg.p != 2.0) throw ConfigError("stochastic AM supports only the quadratic penalty (p = 2)");
    check_batch(batch, traces);
    const double w = 1.0 / (static_cast<double>(batch.size()) * traces.front().size());
    return batched_param_grad(theta, batch.size(), [&](std::size_t i, GradSink& sink) {
        return am_term_stochastic(theta, base, sched, ns, batch[i], traces[i], reg, w, &sink);
    });
}

LossAndGrad draft_loss(const VelocityField& theta, const std::vector<Trajectory>& batch, const RewardFn& reward,
                       int k) {
    if (batch.empty()) throw ShapeError("draft: empty batch");
    const double w = 1.0 / static_cast<double>(batch.size());
    return batched_param_grad(theta, batch.size(), [&](std::size_t i, GradSink& sink) {
        return draft_term(theta, batch[i], reward, k, w, &sink);
    });
}

LossAndGrad refl_loss(const VelocityField& theta, const std::vector<Trajectory>& batch, const RewardFn& reward,
                      int k_window, std::uint64_t seed) {
    if (batch.empty()) throw ShapeError("refl: empty batch");
    const double w = 1.0 / static_cast<double>(batch.size());
    return batched_param_grad(theta, batch.size(), [&](std::size_t i, GradSink& sink) {
        Rng rng(derive_seed(seed, i));
        const int j = refl_pick_step(rng, batch[i].n_steps(), k_window);
        return refl_term(theta, batch[i], reward, j, w, &sink);
    });
}

}  // namespace flowam
