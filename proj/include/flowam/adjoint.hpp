#pragma once

#include "flowam/dynamics.hpp"
#include "flowam/field.hpp"
#include "flowam/schedules.hpp"
#include "flowam/tasks.hpp"
#include "flowam/types.hpp"

#include <string>
#include <vector>

namespace flowam {

inline constexpr double kAdjointBlowup = 1e12;

// Lean adjoint vectors on the terminal window, ascending in time. adjoints.back() sits at t=1 and
// equals terminal_grad. Values are plain data: nothing here is differentiated.
struct AdjointTrace {
    std::vector<double> window;
    std::vector<Vec> adjoints;
    Vec terminal_grad;
    int first_index = 0;  // grid index of window.front()

    int size() const { return static_cast<int>(adjoints.size()); }
    int last_index() const { return first_index + size() - 1; }
    const Vec& at_grid(int k) const { return adjoints.at(k - first_index); }
};

// Backward Euler recursion a_k = a_{k+1} + h a_{k+1}^T grad_x v_base(X_k, t_k) from a_N = terminal_grad.
// Returns the T = n_truncate most recent adjoints (grid indices N-T+1 .. N), so the control applied on
// step k -> k+1 is always paired with a_{k+1}. Only the frozen base field is differentiated.
AdjointTrace lean_adjoint(const VectorField& base, const Trajectory& traj, const Vec& terminal_grad, int n_truncate);
// All N+1 adjoints, down to t=0.
AdjointTrace lean_adjoint_full(const VectorField& base, const Trajectory& traj, const Vec& terminal_grad);

// Same recursion through the Jacobian of the SDE drift (1 + s^2/(2 eta)) v_base - (s^2 kappa/(2 eta)) x.
AdjointTrace lean_adjoint_sde(const VectorField& base, const InterpolantSchedule& sched, const NoiseSchedule& ns,
                              const Trajectory& traj, const Vec& terminal_grad, int n_truncate);
AdjointTrace lean_adjoint_sde_full(const VectorField& base, const InterpolantSchedule& sched,
                                   const NoiseSchedule& ns, const Trajectory& traj, const Vec& terminal_grad);

// Terminal condition for reward maximisation: grad_x g with g = -r.
inline Vec terminal_grad_from_reward(const RewardFn& r, const Vec& x1) { return -r.gradient(x1); }

struct AdjointCheck {
    Vec adjoint;
    Vec fd_gradient;
    double max_rel_err = 0.0;
};

// Compares the lean adjoint at grid index t_index with central differences of g(X_1) = -r(X_1) taken by
// perturbing X_{t_index} and re-integrating the base ODE. Valid when traj was generated by `base`.
AdjointCheck verify_adjoint_fd(const VectorField& base, const Trajectory& traj, const RewardFn& reward, int t_index,
                               double fd_step = 1e-4);

// Debug rows "iter,t,adjoint_norm" appended for every window entry (no header).
void append_adjoint_norms(std::string& csv, int iter, const AdjointTrace& trace);

}  // namespace flowam
