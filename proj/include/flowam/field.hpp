#pragma once

#include "flowam/types.hpp"

namespace flowam {

// A time-dependent velocity field that can also pull back cotangents through its state Jacobian.
// Implemented by the trainable network and by the analytic fields used as test oracles.
class VectorField {
  public:
    virtual ~VectorField() = default;
    virtual int state_dim() const = 0;
    virtual Vec velocity(const Vec& x, double t, CondLabel cond) const = 0;
    // w^T (dv/dx) at (x, t, cond)
    virtual Vec input_vjp(const Vec& x, double t, CondLabel cond, const Vec& w) const = 0;
};

// v(x, t) = A x. Time-independent; used for closed-form exponential flows.
class LinearField final : public VectorField {
  public:
    explicit LinearField(Mat a) : a_(std::move(a)) {}
    static LinearField scalar(int dim, double rate) { return LinearField(rate * Mat::Identity(dim, dim)); }

    int state_dim() const override { return static_cast<int>(a_.rows()); }
    Vec velocity(const Vec& x, double, CondLabel) const override { return a_ * x; }
    Vec input_vjp(const Vec&, double, CondLabel, const Vec& w) const override { return a_.transpose() * w; }

  private:
    Mat a_;
};

}  // namespace flowam
