#include "flowam/dynamics.hpp"

#include "flowam/errors.hpp"
#include "flowam/io.hpp"
#include "flowam/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace flowam {

namespace {

void check_inputs(const VectorField& vf, int n_steps, const Vec& x0) {
    if (n_steps < 1) throw ConfigError("sampler: n_steps must be >= 1");
    if (x0.size() != vf.state_dim()) throw ShapeError("sampler: x0 dimension does not match the field");
    if (!x0.allFinite()) throw NonFiniteError("sampler: x0 is not finite");
}

void check_state(const Vec& x, int k, double t) {
    if (!x.allFinite())
        throw NonFiniteError("sampler diverged: non-finite state at step " + std::to_string(k) +
                             " (t=" + std::to_string(t) + ")");
}

template <class NoiseAt>
Trajectory integrate_sde(const VectorField& vf, const InterpolantSchedule& sched, const NoiseSchedule& ns,
                         int n_steps, const Vec& x0, CondLabel cond, NoiseAt&& noise_at) {
    check_inputs(vf, n_steps, x0);
    Trajectory tr;
    tr.times = uniform_grid(n_steps);
    tr.cond = cond;
    tr.states.reserve(n_steps + 1);
    tr.noises.reserve(n_steps);
    tr.states.push_back(x0);
    const double h = 1.0 / n_steps;
    const double sqrt_h = std::sqrt(h);
    for (int k = 0; k < n_steps; ++k) {
        const double t = tr.times[k];
        const Vec& x = tr.states.back();
        const SdeCoefficients c = sde_coefficients(sched, ns, t, h);
        const Vec v = vf.velocity(x, t, cond);
        const Vec drift = v + c.correction * (v - c.kappa * x);
        const Vec& eps = tr.noises.emplace_back(noise_at(k, static_cast<int>(x.size())));
        if (eps.size() != x.size()) throw ShapeError("replay_sde: stored noise has wrong dimension");
        Vec next = x + h * drift + (sqrt_h * c.sigma) * eps;
        check_state(next, k + 1, tr.times[k + 1]);
        tr.states.push_back(std::move(next));
    }
    return tr;
}

[[noreturn]] void rethrow_with_index(std::size_t i) {
    try {
        throw;
    } catch (const NonFiniteError& e) {
        throw NonFiniteError(std::string(e.what()) + " [sample " + std::to_string(i) + "]");
    } catch (const SingularityError& e) {
        throw SingularityError(std::string(e.what()) + " [sample " + std::to_string(i) + "]");
    } catch (const ShapeError& e) {
        throw ShapeError(std::string(e.what()) + " [sample " + std::to_string(i) + "]");
    }
}

}  // namespace

std::vector<double> uniform_grid(int n_steps) {
    std::vector<double> t(n_steps + 1);
    for (int k = 0; k <= n_steps; ++k) t[k] = static_cast<double>(k) / n_steps;
    return t;
}

SdeCoefficients sde_coefficients(const InterpolantSchedule& sched, const NoiseSchedule& ns, double t, double h) {
    SdeCoefficients c;
    c.t = std::clamp(t, std::max(kTimeFloor, h), 1.0 - kTimeFloor);
    const auto d = drift_coefficients(sched, c.t);
    c.kappa = d.kappa;
    c.eta = d.eta;
    c.sigma = sigma(ns, c.t, sched);
    if (c.sigma > 0.0) {
        if (!(c.eta > 0.0))
            throw SingularityError("sde: eta_t=" + std::to_string(c.eta) + " at t=" + std::to_string(c.t) +
                                   " with nonzero sigma");
        c.correction = c.sigma * c.sigma / (2.0 * c.eta);
    }
    return c;
}

Trajectory sample_ode(const VectorField& vf, int n_steps, const Vec& x0, CondLabel cond) {
    check_inputs(vf, n_steps, x0);
    Trajectory tr;
    tr.times = uniform_grid(n_steps);
    tr.cond = cond;
    tr.states.reserve(n_steps + 1);
    tr.states.push_back(x0);
    const double h = 1.0 / n_steps;
    for (int k = 0; k < n_steps; ++k) {
        const Vec& x = tr.states.back();
        Vec next = x + h * vf.velocity(x, tr.times[k], cond);
        check_state(next, k + 1, tr.times[k + 1]);
        tr.states.push_back(std::move(next));
    }
    return tr;
}

Trajectory sample_sde(const VectorField& vf, const InterpolantSchedule& sched, const NoiseSchedule& ns, int n_steps,
                      const Vec& x0, CondLabel cond, Rng& rng) {
    return integrate_sde(vf, sched, ns, n_steps, x0, cond, [&](int, int dim) { return standard_normal(rng, dim); });
}

Trajectory replay_sde(const VectorField& vf, const InterpolantSchedule& sched, const NoiseSchedule& ns, int n_steps,
                      const Vec& x0, CondLabel cond, const std::vector<Vec>& noises) {
    if (static_cast<int>(noises.size()) != n_steps) throw ShapeError("replay_sde: need one noise draw per step");
    return integrate_sde(vf, sched, ns, n_steps, x0, cond, [&](int k, int) { return noises[k]; });
}

std::vector<Trajectory> sample_batch(const VectorField& vf, const SamplerSpec& spec, int m, std::uint64_t base_seed) {
    if (m < 1) throw ConfigError("sample_batch: batch size must be >= 1");
    std::vector<Trajectory> out(m);
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
        try {
            const std::uint64_t seed = derive_seed(base_seed, i);
            Rng rng(seed);
            const Vec x0 = standard_normal(rng, vf.state_dim());
            const CondLabel cond = spec.n_cond > 0 ? static_cast<CondLabel>(i % spec.n_cond) : kNoCond;
            out[i] = spec.stochastic ? sample_sde(vf, spec.sched, spec.noise, spec.n_steps, x0, cond, rng)
                                     : sample_ode(vf, spec.n_steps, x0, cond);
            out[i].seed = seed;
        } catch (const Error&) {
            rethrow_with_index(i);
        }
    });
    return out;
}

void write_trajectory_dump(const std::filesystem::path& path, const std::vector<Trajectory>& batch,
                           std::uint64_t base_seed) {
    if (batch.empty()) throw EmptyInput("trajectory dump: empty batch");
    const int n = batch.front().n_steps();
    const int dim = static_cast<int>(batch.front().states.front().size());
    nlohmann::ordered_json header = {{"format", "flowam-traj"}, {"format_version", 1}, {"N", n},
                                     {"dim", dim},              {"m", batch.size()},  {"seed", base_seed}};
    std::string out = header.dump() + "\n";
    for (const auto& tr : batch) {
        if (tr.n_steps() != n) throw ShapeError("trajectory dump: trajectories have different grids");
        for (const auto& x : tr.states) io::append_le_doubles(out, std::span<const double>(x.data(), x.size()));
    }
    io::atomic_write(path, out);
}

std::vector<std::vector<Vec>> read_trajectory_dump(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw IoError("trajectory dump: missing header line");
    const auto header = nlohmann::json::parse(bytes.substr(0, nl));
    if (header.value("format", "") != "flowam-traj") throw IoError("trajectory dump: bad format tag");
    const int n = header.at("N"), dim = header.at("dim"), m = header.at("m");
    const auto flat = io::parse_le_doubles(std::string_view(bytes).substr(nl + 1),
                                           static_cast<std::size_t>(m) * (n + 1) * dim);
    std::vector<std::vector<Vec>> out(m);
    std::size_t off = 0;
    for (auto& tr : out) {
        tr.resize(n + 1);
        for (auto& x : tr) {
            x = Eigen::Map<const Vec>(flat.data() + off, dim);
            off += dim;
        }
    }
    return out;
}

}  // namespace flowam
