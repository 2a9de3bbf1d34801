#pragma once

#include "flowam/rng.hpp"
#include "flowam/types.hpp"

#include <string>
#include <vector>

namespace flowam {

struct GaussianMode {
    Vec center;
    double weight = 1.0;
    double std = 1.0;
};

enum class DistributionKind { Gaussian1D, GaussianMixture2D, Ring8 };

// Isotropic Gaussian mixtures with closed-form density and score. Gaussian1D is the one-mode 1D
// case, Ring8 is eight equal modes on a circle.
class DataDistribution {
  public:
    static DataDistribution gaussian_1d(double mean, double std);
    // Weights are normalised to sum to one; every mode must share one dimension.
    static DataDistribution mixture(std::vector<GaussianMode> modes);
    static DataDistribution ring8(double radius, double std);

    DistributionKind kind() const { return kind_; }
    int dim() const { return dim_; }
    const std::vector<GaussianMode>& modes() const { return modes_; }

    double log_density(const Vec& x) const;
    Vec score(const Vec& x) const;
    Vec mean() const;

    Vec sample(Rng& rng) const;
    // Mode index is drawn from the mixture weights; `mode` forces a component (conditional sampling).
    Vec sample_mode(Rng& rng, int mode) const;
    std::vector<Vec> sample_n(int n, Rng& rng) const;

  private:
    DataDistribution(DistributionKind kind, std::vector<GaussianMode> modes);
    DistributionKind kind_;
    int dim_;
    std::vector<GaussianMode> modes_;
};

enum class RewardKind { QuadraticWell, LogDensityTilt, LinearProbe };

// Differentiable terminal reward r(X_1); the terminal cost is g = -r.
class RewardFn {
  public:
    // r = -(curvature/2) |x - center|^2
    static RewardFn quadratic_well(Vec center, double curvature);
    // r = log p_target(x)
    static RewardFn log_density_tilt(DataDistribution target);
    // r = direction . x
    static RewardFn linear_probe(Vec direction);

    RewardKind kind() const { return kind_; }
    int dim() const;
    double value(const Vec& x) const;
    Vec gradient(const Vec& x) const;

  private:
    RewardFn(RewardKind kind) : kind_(kind) {}
    RewardKind kind_;
    Vec vec_;
    double curvature_ = 0.0;
    std::vector<DataDistribution> target_;  // holds at most one
};

inline double reward(const RewardFn& rf, const Vec& x) { return rf.value(x); }
inline Vec reward_grad(const RewardFn& rf, const Vec& x) { return rf.gradient(x); }

std::vector<Vec> sample_data(const DataDistribution& dist, int n, Rng& rng);

}  // namespace flowam
