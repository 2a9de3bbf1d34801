#pragma once

#include "flowam/field.hpp"
#include "flowam/rng.hpp"
#include "flowam/schedules.hpp"
#include "flowam/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace flowam {

// States on the uniform grid t_k = k/N, k = 0..N. `noises` holds the standard normal draw used at
// each step of an SDE run and is empty for ODE runs.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> noises;
    CondLabel cond = kNoCond;
    std::uint64_t seed = 0;

    int n_steps() const { return static_cast<int>(states.size()) - 1; }
    double step() const { return 1.0 / n_steps(); }
    bool stochastic() const { return !noises.empty(); }
    const Vec& terminal() const { return states.back(); }
};

std::vector<double> uniform_grid(int n_steps);

// Coefficients of the matched SDE at a grid time, evaluated at t clamped to
// [max(kTimeFloor, h), 1 - kTimeFloor].
struct SdeCoefficients {
    double t = 0.0;  // clamped evaluation time
    double kappa = 0.0;
    double eta = 0.0;
    double sigma = 0.0;
    double correction = 0.0;  // sigma^2 / (2 eta)
};
SdeCoefficients sde_coefficients(const InterpolantSchedule& sched, const NoiseSchedule& ns, double t, double h);

// Explicit Euler for dX = v(X,t) dt. Throws NonFiniteError on divergence.
Trajectory sample_ode(const VectorField& vf, int n_steps, const Vec& x0, CondLabel cond = kNoCond);

// Euler-Maruyama for dX = [v + sigma^2/(2 eta)(v - kappa X)] dt + sigma dB.
Trajectory sample_sde(const VectorField& vf, const InterpolantSchedule& sched, const NoiseSchedule& ns, int n_steps,
                      const Vec& x0, CondLabel cond, Rng& rng);

// Re-integrates with stored noise draws; reproduces the original states bit-exactly.
Trajectory replay_sde(const VectorField& vf, const InterpolantSchedule& sched, const NoiseSchedule& ns, int n_steps,
                      const Vec& x0, CondLabel cond, const std::vector<Vec>& noises);

struct SamplerSpec {
    bool stochastic = false;
    int n_steps = 50;
    InterpolantSchedule sched = InterpolantSchedule::linear();
    NoiseSchedule noise = NoiseSchedule::zero();
    int n_cond = 0;  // labels are assigned round-robin, sample i gets i % n_cond
};

// m independent trajectories; sample i draws X_0 (and its SDE noise) from derive_seed(base_seed, i).
std::vector<Trajectory> sample_batch(const VectorField& vf, const SamplerSpec& spec, int m, std::uint64_t base_seed);

// Header line {"format":"flowam-traj",...,"N","dim","m","seed"} then states as little-endian doubles,
// trajectory-major, (N+1) x dim each.
void write_trajectory_dump(const std::filesystem::path& path, const std::vector<Trajectory>& batch,
                           std::uint64_t base_seed);
std::vector<std::vector<Vec>> read_trajectory_dump(const std::filesystem::path& path);

}  // namespace flowam
