#include "flowam/nnet.hpp"

#include "flowam/errors.hpp"
#include "flowam/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace flowam {

namespace {

double act(Activation a, double z) {
    switch (a) {
        case Activation::Tanh: return std::tanh(z);
        case Activation::SiLU: return z / (1.0 + std::exp(-z));
        case Activation::Identity: return z;
    }
    return z;
}

double act_grad(Activation a, double z) {
    switch (a) {
        case Activation::Tanh: {
            const double y = std::tanh(z);
            return 1.0 - y * y;
        }
        case Activation::SiLU: {
            const double s = 1.0 / (1.0 + std::exp(-z));
            return s * (1.0 + z * (1.0 - s));
        }
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

}  // namespace

std::string activation_key(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::SiLU: return "silu";
        case Activation::Identity: return "identity";
    }
    return "silu";
}

Activation activation_from_key(const std::string& key) {
    if (key == "tanh") return Activation::Tanh;
    if (key == "silu") return Activation::SiLU;
    if (key == "identity") return Activation::Identity;
    throw ConfigError("unknown activation '" + key + "' (expected: tanh, silu, identity)");
}

VelocityField::VelocityField(Architecture arch) : arch_(std::move(arch)) {
    if (arch_.state_dim < 1) throw ShapeError("architecture: state_dim must be >= 1");
    if (arch_.time_features < 0 || arch_.n_cond < 0) throw ShapeError("architecture: negative embedding width");
    int in = arch_.input_dim();
    for (int width : arch_.hidden) {
        if (width < 1) throw ShapeError("architecture: hidden width must be >= 1");
        layers_.push_back({Mat::Zero(width, in), Vec::Zero(width)});
        in = width;
    }
    layers_.push_back({Mat::Zero(arch_.state_dim, in), Vec::Zero(arch_.state_dim)});
}

VelocityField::VelocityField(Architecture arch, std::uint64_t seed) : VelocityField(std::move(arch)) {
    std::mt19937_64 rng(seed);
    for (auto& layer : layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        std::uniform_real_distribution<double> u(-bound, bound);
        // column-major order, matching the flat parameter layout
        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
            for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = u(rng);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = u(rng);
    }
}

VelocityField VelocityField::zeros(Architecture arch) { return VelocityField(std::move(arch)); }

Eigen::Index VelocityField::num_params() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
}

ParamVector VelocityField::parameters() const {
    ParamVector p(num_params());
    Eigen::Index off = 0;
    for (const auto& l : layers_) {
        p.segment(off, l.weight.size()) = l.weight.reshaped();
        off += l.weight.size();
        p.segment(off, l.bias.size()) = l.bias;
        off += l.bias.size();
    }
    return p;
}

void VelocityField::set_parameters(const ParamVector& p) {
    if (p.size() != num_params())
        throw ShapeError("set_parameters: expected " + std::to_string(num_params()) + " values, got " +
                         std::to_string(p.size()));
    if (!p.allFinite()) throw NonFiniteError("set_parameters: non-finite parameter value");
    Eigen::Index off = 0;
    for (auto& l : layers_) {
        l.weight.reshaped() = p.segment(off, l.weight.size());
        off += l.weight.size();
        l.bias = p.segment(off, l.bias.size());
        off += l.bias.size();
    }
}

void VelocityField::zero_last_layer() {
    layers_.back().weight.setZero();
    layers_.back().bias.setZero();
}

Vec VelocityField::features(const Vec& x, double t, CondLabel cond) const {
    if (x.size() != arch_.state_dim)
        throw ShapeError("velocity field: state has " + std::to_string(x.size()) + " entries, expected " +
                         std::to_string(arch_.state_dim));
    if (cond != kNoCond && (cond < 0 || cond >= arch_.n_cond))
        throw ShapeError("velocity field: condition label " + std::to_string(cond) + " out of range");
    Vec in = Vec::Zero(arch_.input_dim());
    in.head(arch_.state_dim) = x;
    for (int i = 0; i < arch_.time_features; ++i) {
        const double omega = std::numbers::pi * std::ldexp(1.0, i / 2);
        in(arch_.state_dim + i) = (i % 2 == 0) ? std::sin(omega * t) : std::cos(omega * t);
    }
    if (cond >= 0) in(arch_.state_dim + arch_.time_features + cond) = 1.0;
    return in;
}

Vec VelocityField::forward_impl(const Vec& x, double t, CondLabel cond, GradientTape* tape) const {
    Vec a = features(x, t, cond);
    const std::size_t last = layers_.size() - 1;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Vec z = layers_[l].bias;
        z.noalias() += layers_[l].weight * a;
        if (tape) {
            tape->inputs_.push_back(a);
            tape->pre_.push_back(z);
        }
        if (l == last) {
            a = std::move(z);
        } else {
            a = z.unaryExpr([act_kind = arch_.activation](double v) { return act(act_kind, v); });
        }
    }
    return a;
}

Vec VelocityField::velocity(const Vec& x, double t, CondLabel cond) const { return forward_impl(x, t, cond, nullptr); }

GradientTape VelocityField::record(const Vec& x, double t, CondLabel cond) const {
    GradientTape tape;
    tape.owner_ = this;
    tape.inputs_.reserve(layers_.size());
    tape.pre_.reserve(layers_.size());
    tape.output_ = forward_impl(x, t, cond, &tape);
    return tape;
}

Vec VelocityField::backward(GradientTape& tape, const Vec& cotangent, ParamVector* param_grad) const {
    if (tape.consumed_) throw TapeError("gradient tape already consumed by a previous backward call");
    if (tape.owner_ != this) throw TapeError("gradient tape was recorded by a different network");
    if (cotangent.size() != arch_.state_dim) throw ShapeError("backward: cotangent has wrong dimension");
    if (param_grad && param_grad->size() != num_params()) throw ShapeError("backward: gradient buffer has wrong size");
    tape.consumed_ = true;

    // Offsets of each layer's block in the flat layout.
    std::vector<Eigen::Index> offsets(layers_.size());
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        offsets[l] = off;
        off += layers_[l].weight.size() + layers_[l].bias.size();
    }

    Vec delta = cotangent;
    Vec grad_in;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        if (param_grad) {
            Eigen::Map<Mat> gw(param_grad->data() + offsets[l], layer.weight.rows(), layer.weight.cols());
            gw.noalias() += delta * tape.inputs_[l].transpose();
            param_grad->segment(offsets[l] + layer.weight.size(), layer.bias.size()) += delta;
        }
        grad_in.noalias() = layer.weight.transpose() * delta;
        if (l > 0) {
            const Vec& z = tape.pre_[l - 1];
            delta = grad_in.binaryExpr(z, [act_kind = arch_.activation](double g, double zz) {
                return g * act_grad(act_kind, zz);
            });
        }
    }
    return grad_in.head(arch_.state_dim);
}

Vec VelocityField::input_vjp(const Vec& x, double t, CondLabel cond, const Vec& w) const {
    if (w.size() != arch_.state_dim) throw ShapeError("input_vjp: cotangent has wrong dimension");
    GradientTape tape = record(x, t, cond);
    return backward(tape, w, nullptr);
}

LossAndGrad param_grad(const VelocityField& vf, const LossClosure& closure) {
    LossAndGrad out;
    out.grad = ParamVector::Zero(vf.num_params());
    GradSink sink(vf, out.grad);
    out.loss = closure(vf, sink);
    if (!std::isfinite(out.loss)) throw NonFiniteError("param_grad: loss is not finite");
    if (!out.grad.allFinite()) throw NonFiniteError("param_grad: gradient has non-finite entries");
    return out;
}

LossAndGrad batched_param_grad(const VelocityField& vf, std::size_t m, const SampleClosure& per_sample) {
    // Fixed-size blocks, each summed in ascending order, then blocks in ascending order: the summation
    // tree depends only on m.
    constexpr std::size_t kBlock = 16;
    const std::size_t n_blocks = (m + kBlock - 1) / kBlock;
    std::vector<double> losses(n_blocks, 0.0);
    std::vector<ParamVector> grads(n_blocks);
    parallel_for(n_blocks, [&](std::size_t b) {
        grads[b] = ParamVector::Zero(vf.num_params());
        GradSink sink(vf, grads[b]);
        for (std::size_t i = b * kBlock; i < std::min(m, (b + 1) * kBlock); ++i) losses[b] += per_sample(i, sink);
    });
    LossAndGrad out;
    out.grad = ParamVector::Zero(vf.num_params());
    for (std::size_t b = 0; b < n_blocks; ++b) {
        out.loss += losses[b];
        out.grad += grads[b];
    }
    if (!std::isfinite(out.loss)) throw NonFiniteError("param_grad: loss is not finite");
    if (!out.grad.allFinite()) throw NonFiniteError("param_grad: gradient has non-finite entries");
    return out;
}

}  // namespace flowam
