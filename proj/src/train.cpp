#include "flowam/train.hpp"

#include "flowam/errors.hpp"
#include "flowam/eval.hpp"
#include "flowam/io.hpp"
#include "flowam/parallel.hpp"
#include "flowam/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace flowam {

double warmup_lr(const OptimConfig& cfg, int iter) {
    if (cfg.warmup <= 0) return cfg.lr;
    return cfg.lr * std::min(1.0, static_cast<double>(iter + 1) / cfg.warmup);
}

void optimizer_step(OptimizerState& opt, ParamVector& params, const ParamVector& grads, const OptimConfig& cfg,
                    int iter) {
    if (grads.size() != params.size()) throw ShapeError("optimizer_step: gradient and parameter sizes differ");
    if (!grads.allFinite()) throw NonFiniteError("optimizer_step: non-finite gradient at iteration " + std::to_string(iter));
    if (opt.m.size() != params.size()) {
        opt.m = ParamVector::Zero(params.size());
        opt.v = ParamVector::Zero(params.size());
        opt.step = 0;
    }
    ParamVector g = grads;
    if (cfg.grad_clip > 0.0) {
        const double n = g.norm();
        if (n > cfg.grad_clip) g *= cfg.grad_clip / n;
    }
    ++opt.step;
    opt.m = cfg.beta1 * opt.m + (1.0 - cfg.beta1) * g;
    opt.v = cfg.beta2 * opt.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step));
    const double lr = warmup_lr(cfg, iter);
    ParamVector next =
        params - lr * ((opt.m / bc1).array() / ((opt.v / bc2).array().sqrt() + cfg.eps)).matrix();
    if (!next.allFinite()) throw NonFiniteError("optimizer_step: parameters became non-finite at iteration " + std::to_string(iter));
    params = std::move(next);
}

PretrainResult pretrain(const PretrainConfig& cfg, const Architecture& arch, const DataDistribution& dist) {
    if (cfg.iterations < 0) throw ConfigError("pretrain: iterations must be >= 0");
    if (cfg.batch < 1) throw ConfigError("pretrain: batch must be >= 1");
    if (arch.state_dim != dist.dim()) throw ConfigError("pretrain: architecture and data dimensions differ");
    const int n_modes = static_cast<int>(dist.modes().size());
    if (cfg.conditional && arch.n_cond != n_modes)
        throw ConfigError("pretrain: conditional training needs n_cond == number of mixture modes");

    PretrainResult res{VelocityField(arch, cfg.seed), {}};
    res.losses.reserve(cfg.iterations);
    OptimizerState opt;
    ParamVector params = res.model.parameters();
    const double w = 1.0 / cfg.batch;
    for (int it = 0; it < cfg.iterations; ++it) {
        const std::uint64_t iter_seed = derive_seed(cfg.seed ^ 0x5052455452414931ULL, it);
        LossAndGrad lg;
        try {
            lg = batched_param_grad(res.model, cfg.batch, [&](std::size_t i, GradSink& sink) {
                Rng rng(derive_seed(iter_seed, i));
                const Vec x0 = standard_normal(rng, arch.state_dim);
                const double t = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                CondLabel cond = kNoCond;
                Vec x1;
                if (cfg.conditional) {
                    cond = std::uniform_int_distribution<int>(0, n_modes - 1)(rng);
                    x1 = dist.sample_mode(rng, cond);
                } else {
                    x1 = dist.sample(rng);
                }
                const Vec xt = cfg.sched.beta(t) * x0 + cfg.sched.alpha(t) * x1;
                const Vec target = cfg.sched.beta_dot(t) * x0 + cfg.sched.alpha_dot(t) * x1;
                GradientTape tape = res.model.record(xt, t, cond);
                const Vec r = tape.output() - target;
                sink.backward(tape, 2.0 * w * r);
                return w * r.squaredNorm();
            });
            optimizer_step(opt, params, lg.grad, cfg.optim, it);
        } catch (const NonFiniteError& e) {
            throw NonFiniteError(std::string(e.what()) + " [pretrain iteration " + std::to_string(it) + "]");
        }
        res.model.set_parameters(params);
        res.losses.push_back(lg.loss);
    }
    return res;
}

std::string method_key(FinetuneMethod m) {
    switch (m) {
        case FinetuneMethod::OdeAm: return "ode-am";
        case FinetuneMethod::SdeAm: return "sde-am";
        case FinetuneMethod::Draft: return "draft";
        case FinetuneMethod::Refl: return "refl";
    }
    return "?";
}

FinetuneMethod method_from_key(std::string_view key) {
    if (key == "ode-am") return FinetuneMethod::OdeAm;
    if (key == "sde-am") return FinetuneMethod::SdeAm;
    if (key == "draft") return FinetuneMethod::Draft;
    if (key == "refl") return FinetuneMethod::Refl;
    throw ConfigError("unknown method '" + std::string(key) + "' (expected ode-am | sde-am | draft | refl)");
}

void TrainConfig::validate() const {
    if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
    if (n_truncate < 1 || n_truncate > n_steps) throw ConfigError("n_truncate must satisfy 1 <= T <= N");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (!(optim.lr > 0.0)) throw ConfigError("learning rate must be > 0");
    reg.validate();
    if (method == FinetuneMethod::SdeAm && reg.p != 2.0)
        throw ConfigError("sde-am supports only the quadratic penalty (p = 2)");
    if (method == FinetuneMethod::SdeAm && noise.kind == NoiseKind::Zero)
        throw ConfigError("sde-am needs a noise schedule with sigma > 0");
    if (method == FinetuneMethod::Draft && (draft_k < 1 || draft_k > n_steps))
        throw ConfigError("draft_k must lie in [1, N]");
    if (method == FinetuneMethod::Refl && (refl_k < 1 || refl_k > n_steps))
        throw ConfigError("refl_k must lie in [1, N]");
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

FinetuneResult finetune(const TrainConfig& cfg, const VelocityField& base_in, const RewardFn& reward,
                        const EvalHook& on_eval) {
    cfg.validate();
    if (reward.dim() != base_in.state_dim()) throw ConfigError("finetune: reward and model dimensions differ");
    const VelocityField base = base_in;  // frozen copy for the whole run
    FinetuneResult res{base_in, {}, {}};
    OptimizerState opt;
    ParamVector params = res.model.parameters();

    SamplerSpec spec;
    spec.n_steps = cfg.n_steps;
    spec.sched = cfg.sched;
    spec.n_cond = cfg.n_cond;
    spec.stochastic = cfg.method == FinetuneMethod::SdeAm;
    spec.noise = spec.stochastic ? cfg.noise : NoiseSchedule::zero();

    for (int it = 0; it < cfg.iterations; ++it) {
        try {
            IterationMetrics m;
            m.iter = it;
            const std::uint64_t iter_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(it));

            auto t0 = Clock::now();
            const auto batch = sample_batch(res.model, spec, cfg.batch, iter_seed);
            m.sim_ms = ms_since(t0);
            const auto rs = reward_stats(reward, terminal_states(batch));
            m.reward_mean = rs.mean;
            m.reward_std = rs.std;

            t0 = Clock::now();
            std::vector<AdjointTrace> traces;
            if (cfg.method == FinetuneMethod::OdeAm || cfg.method == FinetuneMethod::SdeAm) {
                traces.resize(batch.size());
                parallel_for(batch.size(), [&](std::size_t i) {
                    const Vec g1 = terminal_grad_from_reward(reward, batch[i].terminal());
                    traces[i] = spec.stochastic
                                    ? lean_adjoint_sde(base, cfg.sched, cfg.noise, batch[i], g1, cfg.n_truncate)
                                    : lean_adjoint(base, batch[i], g1, cfg.n_truncate);
                });
                if (cfg.adjoint_dump) append_adjoint_norms(res.adjoint_csv, it, traces.front());
            }
            m.adj_ms = ms_since(t0);

            t0 = Clock::now();
            LossAndGrad lg;
            switch (cfg.method) {
                case FinetuneMethod::OdeAm: lg = am_loss_deterministic(res.model, base, batch, traces, cfg.reg); break;
                case FinetuneMethod::SdeAm:
                    lg = am_loss_stochastic(res.model, base, cfg.sched, cfg.noise, batch, traces, cfg.reg);
                    break;
                case FinetuneMethod::Draft: lg = draft_loss(res.model, batch, reward, cfg.draft_k); break;
                case FinetuneMethod::Refl:
                    lg = refl_loss(res.model, batch, reward, cfg.refl_k, derive_seed(iter_seed, 0x5245464CULL));
                    break;
            }
            optimizer_step(opt, params, lg.grad, cfg.optim, it);
            res.model.set_parameters(params);
            m.upd_ms = ms_since(t0);
            m.loss = lg.loss;
            res.metrics.push_back(m);
        } catch (const NonFiniteError& e) {
            throw NonFiniteError(std::string(e.what()) + " [finetune iteration " + std::to_string(it) + "]");
        }
        if (on_eval && cfg.eval_every > 0 && (it + 1) % cfg.eval_every == 0) on_eval(it + 1, res.model);
    }
    return res;
}

std::string metrics_csv_header() { return "iter,loss,reward_mean,reward_std,phase_sim_ms,phase_adj_ms,phase_upd_ms\n"; }

std::string metrics_csv_row(const IterationMetrics& m, bool log_timings) {
    using io::format_double;
    auto ms = [&](double v) { return log_timings ? format_double(v) : std::string("0"); };
    return std::to_string(m.iter) + "," + format_double(m.loss) + "," + format_double(m.reward_mean) + "," +
           format_double(m.reward_std) + "," + ms(m.sim_ms) + "," + ms(m.adj_ms) + "," + ms(m.upd_ms) + "\n";
}

std::string metrics_csv(const std::vector<IterationMetrics>& rows, bool log_timings) {
    std::string out = metrics_csv_header();
    for (const auto& r : rows) out += metrics_csv_row(r, log_timings);
    return out;
}

}  // namespace flowam
