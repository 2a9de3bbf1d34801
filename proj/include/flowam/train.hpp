#pragma once

#include "flowam/adjoint.hpp"
#include "flowam/control.hpp"
#include "flowam/dynamics.hpp"
#include "flowam/nnet.hpp"
#include "flowam/schedules.hpp"
#include "flowam/tasks.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace flowam {

struct OptimConfig {
    double lr = 1e-3;
    int warmup = 0;          // linear ramp over the first `warmup` steps
    double grad_clip = 1.0;  // global-norm clip; <= 0 disables
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
};

struct OptimizerState {
    ParamVector m, v;
    long step = 0;
};

// Clips, then applies one Adam step with lr scaled by min(1, iter+1 / warmup). Throws NonFiniteError
// if the gradients or the resulting parameters are not finite; params are left untouched in that case.
void optimizer_step(OptimizerState& opt, ParamVector& params, const ParamVector& grads, const OptimConfig& cfg,
                    int iter);
double warmup_lr(const OptimConfig& cfg, int iter);

struct PretrainConfig {
    int iterations = 3000;
    int batch = 256;
    OptimConfig optim{};
    std::uint64_t seed = 0;
    bool conditional = false;  // label = mixture mode; needs arch.n_cond == number of modes
    InterpolantSchedule sched = InterpolantSchedule::linear();
};

struct PretrainResult {
    VelocityField model;
    std::vector<double> losses;
};

// Flow-matching regression of v(beta X0 + alpha X1, t) onto beta' X0 + alpha' X1 with X0 ~ N(0, I),
// X1 ~ data, t ~ U[0, 1]. Initialised from VelocityField(arch, seed).
PretrainResult pretrain(const PretrainConfig& cfg, const Architecture& arch, const DataDistribution& dist);

enum class FinetuneMethod { OdeAm, SdeAm, Draft, Refl };
std::string method_key(FinetuneMethod m);
FinetuneMethod method_from_key(std::string_view key);

struct TrainConfig {
    FinetuneMethod method = FinetuneMethod::OdeAm;
    int n_steps = 50;
    int n_truncate = 10;
    int batch = 64;
    int iterations = 300;
    OptimConfig optim{1e-4};
    RegularizerSpec reg{};
    InterpolantSchedule sched = InterpolantSchedule::linear();
    NoiseSchedule noise = NoiseSchedule::memoryless();  // sde-am only
    std::uint64_t seed = 0;
    int n_cond = 0;
    int draft_k = 1;
    int refl_k = 5;
    int eval_every = 0;        // 0 disables the periodic hook
    bool log_timings = true;   // false writes 0 into the phase columns
    bool adjoint_dump = false; // per-iteration |a_t| of sample 0

    void validate() const;  // ConfigError
};

struct IterationMetrics {
    int iter = 0;
    double loss = 0.0;
    double reward_mean = 0.0;
    double reward_std = 0.0;
    double sim_ms = 0.0;
    double adj_ms = 0.0;
    double upd_ms = 0.0;
};

struct FinetuneResult {
    VelocityField model;
    std::vector<IterationMetrics> metrics;
    std::string adjoint_csv;  // iter,t,adjoint_norm rows when adjoint_dump is set
};

using EvalHook = std::function<void(int iter, const VelocityField& model)>;

// Algorithm: resample a batch from the current model, integrate the lean adjoint against the frozen
// base, regress the implicit control onto the adjoint-derived target, take one optimizer step.
FinetuneResult finetune(const TrainConfig& cfg, const VelocityField& base, const RewardFn& reward,
                        const EvalHook& on_eval = {});

std::string metrics_csv_header();
std::string metrics_csv_row(const IterationMetrics& m, bool log_timings);
std::string metrics_csv(const std::vector<IterationMetrics>& rows, bool log_timings);

}  // namespace flowam
