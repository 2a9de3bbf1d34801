#pragma once

#include "flowam/adjoint.hpp"
#include "flowam/dynamics.hpp"
#include "flowam/field.hpp"
#include "flowam/nnet.hpp"
#include "flowam/rng.hpp"
#include "flowam/schedules.hpp"
#include "flowam/tasks.hpp"
#include "flowam/types.hpp"

#include <cstdint>
#include <vector>

namespace flowam {

// Control penalty f(r) = r^p / (p lambda). Requires p > 1, lambda > 0.
struct RegularizerSpec {
    double p = 2.0;
    double lambda = 1.0;
    double eps_adjoint = 1e-12;

    void validate() const;  // ConfigError
    double f(double r) const;
    double f_prime(double r) const;  // r^{p-1} / lambda
};

// u* = -lambda^{1/(p-1)} |a|^{(2-p)/(p-1)} a, and 0 below eps_adjoint.
Vec control_from_adjoint(const RegularizerSpec& reg, const Vec& a);

// |f'(|u|) u/|u| + a|, with the u = 0 term taken as zero.
double check_pmp_optimality(const RegularizerSpec& reg, const Vec& a, const Vec& u);

struct ControlTarget {
    std::vector<double> window;
    std::vector<Vec> targets;
};
ControlTarget control_target(const RegularizerSpec& reg, const AdjointTrace& trace);

// Loss window of a T-entry trace: states X_k for k = N-T .. N-1, the step-start states whose outgoing
// velocity is paired with a_{k+1}.
inline int loss_window_begin(const AdjointTrace& trace) { return trace.first_index - 1; }
inline int loss_window_end(const AdjointTrace& trace) { return trace.last_index(); }  // exclusive

// (sigma^2 + 2 eta) / (2 sigma eta). SingularityError if sigma or eta is zero.
double stochastic_loss_coefficient(double sigma, double eta);

// --- Per-trajectory terms. Each returns weight * sum over its loss terms and, when sink is non-null,
// pushes the matching dL/dv through it. Only v_theta is differentiated.

double am_term_deterministic(const VelocityField& theta, const VectorField& base, const Trajectory& traj,
                             const AdjointTrace& trace, const RegularizerSpec& reg, double weight, GradSink* sink);

double am_term_stochastic(const VelocityField& theta, const VectorField& base, const InterpolantSchedule& sched,
                          const NoiseSchedule& ns, const Trajectory& traj, const AdjointTrace& trace,
                          const RegularizerSpec& reg, double weight, GradSink* sink);

// -r at the end of the last k Euler steps re-simulated from X_{N-k} through v_theta.
double draft_term(const VelocityField& theta, const Trajectory& traj, const RewardFn& reward, int k, double weight,
                  GradSink* sink);

// -r(X_j + (1 - t_j) v_theta(X_j, t_j)) for one step j.
double refl_term(const VelocityField& theta, const Trajectory& traj, const RewardFn& reward, int step_index,
                 double weight, GradSink* sink);

// Uniform draw of j from {N-k_window, ..., N-1}.
int refl_pick_step(Rng& rng, int n_steps, int k_window);

// --- Batch losses: mean over batch x window (AM) or over batch (baselines), with parameter gradients.

LossAndGrad am_loss_deterministic(const VelocityField& theta, const VectorField& base,
                                  const std::vector<Trajectory>& batch, const std::vector<AdjointTrace>& traces,
                                  const RegularizerSpec& reg);

// p must be 2 (ConfigError otherwise); sigma must be positive on the window (SingularityError).
LossAndGrad am_loss_stochastic(const VelocityField& theta, const VectorField& base, const InterpolantSchedule& sched,
                               const NoiseSchedule& ns, const std::vector<Trajectory>& batch,
                               const std::vector<AdjointTrace>& traces, const RegularizerSpec& reg);

LossAndGrad draft_loss(const VelocityField& theta, const std::vector<Trajectory>& batch, const RewardFn& reward,
                       int k);

// Sample i draws its step from derive_seed(seed, i).
LossAndGrad refl_loss(const VelocityField& theta, const std::vector<Trajectory>& batch, const RewardFn& reward,
                      int k_window, std::uint64_t seed);

}  // namespace flowam
