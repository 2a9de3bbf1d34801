#include "flowam/tasks.hpp"

#include "flowam/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace flowam {

DataDistribution::DataDistribution(DistributionKind kind, std::vector<GaussianMode> modes)
    : kind_(kind), dim_(0), modes_(std::move(modes)) {
    if (modes_.empty()) throw ConfigError("distribution: at least one mode required");
    dim_ = static_cast<int>(modes_.front().center.size());
    if (dim_ < 1) throw ConfigError("distribution: mode center must have dimension >= 1");
    double total = 0.0;
    for (const auto& m : modes_) {
        if (m.center.size() != dim_) throw ConfigError("distribution: modes have different dimensions");
        if (!(m.std > 0.0)) throw ConfigError("distribution: mode std must be > 0");
        if (!(m.weight > 0.0)) throw ConfigError("distribution: mode weight must be > 0");
        total += m.weight;
    }
    for (auto& m : modes_) m.weight /= total;
}

DataDistribution DataDistribution::gaussian_1d(double mean, double std) {
    return DataDistribution(DistributionKind::Gaussian1D, {{Vec::Constant(1, mean), 1.0, std}});
}

DataDistribution DataDistribution::mixture(std::vector<GaussianMode> modes) {
    return DataDistribution(DistributionKind::GaussianMixture2D, std::move(modes));
}

DataDistribution DataDistribution::ring8(double radius, double std) {
    std::vector<GaussianMode> modes;
    for (int i = 0; i < 8; ++i) {
        const double a = 2.0 * std::numbers::pi * i / 8.0;
        Vec c(2);
        c << radius * std::cos(a), radius * std::sin(a);
        modes.push_back({c, 1.0, std});
    }
    return DataDistribution(DistributionKind::Ring8, std::move(modes));
}

namespace {

// log w_i + log N(x; c_i, s_i^2 I) for every mode
std::vector<double> component_logs(const std::vector<GaussianMode>& modes, const Vec& x) {
    std::vector<double> out;
    out.reserve(modes.size());
    const double d = static_cast<double>(x.size());
    for (const auto& m : modes) {
        const double s2 = m.std * m.std;
        out.push_back(std::log(m.weight) - 0.5 * d * std::log(2.0 * std::numbers::pi * s2) -
                      0.5 * (x - m.center).squaredNorm() / s2);
    }
    return out;
}

}  // namespace

double DataDistribution::log_density(const Vec& x) const {
    if (x.size() != dim_) throw ShapeError("log_density: wrong dimension");
    const auto logs = component_logs(modes_, x);
    const double mx = *std::max_element(logs.begin(), logs.end());
    double s = 0.0;
    for (double l : logs) s += std::exp(l - mx);
    return mx + std::log(s);
}

Vec DataDistribution::score(const Vec& x) const {
    if (x.size() != dim_) throw ShapeError("score: wrong dimension");
    const auto logs = component_logs(modes_, x);
    const double mx = *std::max_element(logs.begin(), logs.end());
    double z = 0.0;
    Vec acc = Vec::Zero(dim_);
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        const double r = std::exp(logs[i] - mx);
        z += r;
        acc += r * (modes_[i].center - x) / (modes_[i].std * modes_[i].std);
    }
    return acc / z;
}

Vec DataDistribution::mean() const {
    Vec m = Vec::Zero(dim_);
    for (const auto& mode : modes_) m += mode.weight * mode.center;
    return m;
}

Vec DataDistribution::sample_mode(Rng& rng, int mode) const {
    if (mode < 0 || mode >= static_cast<int>(modes_.size())) throw ConfigError("sample_mode: mode out of range");
    const auto& m = modes_[mode];
    return m.center + m.std * standard_normal(rng, dim_);
}

Vec DataDistribution::sample(Rng& rng) const {
    int mode = 0;
    if (modes_.size() > 1) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double r = u(rng);
        double c = 0.0;
        mode = static_cast<int>(modes_.size()) - 1;
        for (std::size_t i = 0; i < modes_.size(); ++i) {
            c += modes_[i].weight;
            if (r < c) {
                mode = static_cast<int>(i);
                break;
            }
        }
    }
    return sample_mode(rng, mode);
}

std::vector<Vec> DataDistribution::sample_n(int n, Rng& rng) const {
    if (n < 1) throw ConfigError("sample_data: n must be >= 1");
    std::vector<Vec> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.push_back(sample(rng));
    return out;
}

std::vector<Vec> sample_data(const DataDistribution& dist, int n, Rng& rng) { return dist.sample_n(n, rng); }

RewardFn RewardFn::quadratic_well(Vec center, double curvature) {
    RewardFn r(RewardKind::QuadraticWell);
    r.vec_ = std::move(center);
    r.curvature_ = curvature;
    return r;
}

RewardFn RewardFn::log_density_tilt(DataDistribution target) {
    RewardFn r(RewardKind::LogDensityTilt);
    r.target_.push_back(std::move(target));
    return r;
}

RewardFn RewardFn::linear_probe(Vec direction) {
    RewardFn r(RewardKind::LinearProbe);
    r.vec_ = std::move(direction);
    return r;
}

int RewardFn::dim() const {
    return kind_ == RewardKind::LogDensityTilt ? target_.front().dim() : static_cast<int>(vec_.size());
}

double RewardFn::value(const Vec& x) const {
    if (x.size() != dim()) throw ShapeError("reward: wrong dimension");
    switch (kind_) {
        case RewardKind::QuadraticWell: return -0.5 * curvature_ * (x - vec_).squaredNorm();
        case RewardKind::LogDensityTilt: return target_.front().log_density(x);
        case RewardKind::LinearProbe: return vec_.dot(x);
    }
    return 0.0;
}

Vec RewardFn::gradient(const Vec& x) const {
    if (x.size() != dim()) throw ShapeError("reward_grad: wrong dimension");
    switch (kind_) {
        case RewardKind::QuadraticWell: return -curvature_ * (x - vec_);
        case RewardKind::LogDensityTilt: return target_.front().score(x);
        case RewardKind::LinearProbe: return vec_;
    }
    return Vec::Zero(x.size());
}

}  // namespace flowam
