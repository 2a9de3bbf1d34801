#pragma once

#include "flowam/field.hpp"
#include "flowam/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace flowam {

enum class Activation { Tanh, SiLU, Identity };

std::string activation_key(Activation a);
Activation activation_from_key(const std::string& key);

struct Architecture {
    int state_dim = 2;
    std::vector<int> hidden = {64, 64, 64};
    Activation activation = Activation::SiLU;
    int time_features = 8;  // sinusoidal features of t
    int n_cond = 0;         // one-hot width for discrete condition labels; 0 = unconditional

    int input_dim() const { return state_dim + time_features + n_cond; }
    bool operator==(const Architecture&) const = default;
};

struct DenseLayer {
    Mat weight;  // out x in
    Vec bias;    // out
};

// Flat parameter / gradient layout: for each layer in order, weight (column-major) then bias.
using ParamVector = Vec;

class VelocityField;

// Primal activations of one forward pass. A tape may be consumed by exactly one backward call.
class GradientTape {
  public:
    const Vec& output() const { return output_; }
    bool consumed() const { return consumed_; }

  private:
    friend class VelocityField;
    const VelocityField* owner_ = nullptr;
    std::vector<Vec> inputs_;  // input to each layer
    std::vector<Vec> pre_;     // pre-activation of each layer
    Vec output_;
    bool consumed_ = false;
};

// MLP velocity field v_theta(x, t, c): [x, time features, one-hot(c)] -> hidden layers -> linear output.
class VelocityField final : public VectorField {
  public:
    // PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation from a fixed seed.
    VelocityField(Architecture arch, std::uint64_t seed);
    static VelocityField zeros(Architecture arch);

    const Architecture& architecture() const { return arch_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    Eigen::Index num_params() const;
    ParamVector parameters() const;
    // Throws NonFiniteError on NaN/Inf, ShapeError on size mismatch.
    void set_parameters(const ParamVector& p);
    void zero_last_layer();

    Vec features(const Vec& x, double t, CondLabel cond) const;

    int state_dim() const override { return arch_.state_dim; }
    Vec velocity(const Vec& x, double t, CondLabel cond) const override;
    Vec input_vjp(const Vec& x, double t, CondLabel cond, const Vec& w) const override;

    GradientTape record(const Vec& x, double t, CondLabel cond) const;
    // Pulls `cotangent` (dL/dv) back through the recorded pass. Adds dL/dtheta into *param_grad when
    // non-null and returns dL/dx for the state block. Throws TapeError if the tape was already used.
    Vec backward(GradientTape& tape, const Vec& cotangent, ParamVector* param_grad) const;

  private:
    explicit VelocityField(Architecture arch);
    Vec forward_impl(const Vec& x, double t, CondLabel cond, GradientTape* tape) const;

    Architecture arch_;
    std::vector<DenseLayer> layers_;
};

// Receives the backward calls issued by a loss closure and accumulates into one gradient.
class GradSink {
  public:
    GradSink(const VelocityField& vf, ParamVector& grad) : vf_(vf), grad_(grad) {}
    Vec backward(GradientTape& tape, const Vec& cotangent) { return vf_.backward(tape, cotangent, &grad_); }

  private:
    const VelocityField& vf_;
    ParamVector& grad_;
};

struct LossAndGrad {
    double loss = 0.0;
    ParamVector grad;
};

// The closure evaluates a scalar loss from forward passes (vf.record) and pushes dL/dv for each
// recorded pass through the sink. Throws NonFiniteError if the loss or any gradient entry is NaN/Inf.
using LossClosure = std::function<double(const VelocityField&, GradSink&)>;
LossAndGrad param_grad(const VelocityField& vf, const LossClosure& closure);

// Sum of per-sample closures. Samples are grouped in fixed blocks that run in parallel; the reduction
// order depends only on m, never on the worker count.
using SampleClosure = std::function<double(std::size_t, GradSink&)>;
LossAndGrad batched_param_grad(const VelocityField& vf, std::size_t m, const SampleClosure& per_sample);

}  // namespace flowam
