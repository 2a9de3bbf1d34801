#include "flowam/adjoint.hpp"

#include "flowam/errors.hpp"
#include "flowam/io.hpp"

#include <algorithm>
#include <cmath>

namespace flowam {

namespace {

void check_trace_inputs(const VectorField& base, const Trajectory& traj, const Vec& terminal_grad, int n_truncate) {
    const int n = traj.n_steps();
    if (n < 1) throw ShapeError("lean_adjoint: empty trajectory");
    if (n_truncate < 1 || n_truncate > n + 1)
        throw ShapeError("lean_adjoint: n_truncate=" + std::to_string(n_truncate) + " outside [1, N]");
    if (terminal_grad.size() != base.state_dim() || traj.terminal().size() != base.state_dim())
        throw ShapeError("lean_adjoint: dimension mismatch");
    if (!terminal_grad.allFinite()) throw NonFiniteError("lean_adjoint: terminal gradient is not finite");
}

// step(k, a_{k+1}) returns a_k. Entries are filled from the back.
template <class Step>
AdjointTrace backward(const Trajectory& traj, const Vec& terminal_grad, int count, Step&& step) {
    const int n = traj.n_steps();
    AdjointTrace tr;
    tr.terminal_grad = terminal_grad;
    tr.first_index = n - count + 1;
    tr.window.assign(traj.times.begin() + tr.first_index, traj.times.end());
    tr.adjoints.resize(count);
    tr.adjoints.back() = terminal_grad;
    for (int k = n - 1; k >= tr.first_index; --k) {
        const Vec& next = tr.adjoints[k + 1 - tr.first_index];
        Vec a = step(k, next);
        const double norm = a.norm();
        if (!std::isfinite(norm) || norm > kAdjointBlowup)
            throw NonFiniteError("lean adjoint blew up at step " + std::to_string(k) + " (t=" +
                                 std::to_string(traj.times[k]) + ", |a|=" + std::to_string(norm) + ")");
        tr.adjoints[k - tr.first_index] = std::move(a);
    }
    return tr;
}

}  // namespace

AdjointTrace lean_adjoint(const VectorField& base, const Trajectory& traj, const Vec& terminal_grad, int n_truncate) {
    check_trace_inputs(base, traj, terminal_grad, n_truncate);
    const double h = traj.step();
    return backward(traj, terminal_grad, n_truncate, [&](int k, const Vec& a) -> Vec {
        return a + h * base.input_vjp(traj.states[k], traj.times[k], traj.cond, a);
    });
}

AdjointTrace lean_adjoint_full(const VectorField& base, const Trajectory& traj, const Vec& terminal_grad) {
    return lean_adjoint(base, traj, terminal_grad, traj.n_steps() + 1);
}

AdjointTrace lean_adjoint_sde(const VectorField& base, const InterpolantSchedule& sched, const NoiseSchedule& ns,
                              const Trajectory& traj, const Vec& terminal_grad, int n_truncate) {
    check_trace_inputs(base, traj, terminal_grad, n_truncate);
    const double h = traj.step();
    return backward(traj, terminal_grad, n_truncate, [&](int k, const Vec& a) -> Vec {
        const SdeCoefficients c = sde_coefficients(sched, ns, traj.times[k], h);
        const Vec vjp = base.input_vjp(traj.states[k], traj.times[k], traj.cond, a);
        return a + h * ((1.0 + c.correction) * vjp - (c.correction * c.kappa) * a);
    });
}

AdjointTrace lean_adjoint_sde_full(const VectorField& base, const InterpolantSchedule& sched,
                                   const NoiseSchedule& ns, const Trajectory& traj, const Vec& terminal_grad) {
    return lean_adjoint_sde(base, sched, ns, traj, terminal_grad, traj.n_steps() + 1);
}

AdjointCheck verify_adjoint_fd(const VectorField& base, const Trajectory& traj, const RewardFn& reward, int t_index,
                               double fd_step) {
    const int n = traj.n_steps();
    if (t_index < 0 || t_index > n) throw ShapeError("verify_adjoint_fd: t_index out of range");
    const Vec g1 = terminal_grad_from_reward(reward, traj.terminal());
    const AdjointTrace full = lean_adjoint_full(base, traj, g1);

    const double h = traj.step();
    auto terminal_cost = [&](Vec x) {
        for (int k = t_index; k < n; ++k) x = x + h * base.velocity(x, traj.times[k], traj.cond);
        return -reward.value(x);
    };

    AdjointCheck out;
    out.adjoint = full.at_grid(t_index);
    const Vec& x = traj.states[t_index];
    out.fd_gradient.resize(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp(i) += fd_step;
        xm(i) -= fd_step;
        out.fd_gradient(i) = (terminal_cost(xp) - terminal_cost(xm)) / (2.0 * fd_step);
    }
    const double scale = std::max(out.fd_gradient.lpNorm<Eigen::Infinity>(), out.adjoint.lpNorm<Eigen::Infinity>());
    const double diff = (out.adjoint - out.fd_gradient).lpNorm<Eigen::Infinity>();
    out.max_rel_err = scale > 0.0 ? diff / scale : 0.0;
    return out;
}

void append_adjoint_norms(std::string& csv, int iter, const AdjointTrace& trace) {
    for (int i = 0; i < trace.size(); ++i) {
        csv += std::to_string(iter);
        csv += ',';
        csv += io::format_double(trace.window[i]);
        csv += ',';
        csv += io::format_double(trace.adjoints[i].norm());
        csv += '\n';
    }
}

}  // namespace flowam
