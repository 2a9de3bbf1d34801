#include "flowam/errors.hpp"
#include "flowam/schedules.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"

using namespace flowam;
using testing_helpers::vec1;

namespace {
const auto lin = InterpolantSchedule::linear();
}

TEST(Schedules, LinearCoefficientsAtHalf) {
    const auto d = drift_coefficients(lin, 0.5);
    EXPECT_DOUBLE_EQ(d.kappa, 2.0);
    EXPECT_DOUBLE_EQ(d.eta, 1.0);
}

TEST(Schedules, LinearCoefficientsAtQuarterAndOne) {
    const auto d = drift_coefficients(lin, 0.25);
    EXPECT_DOUBLE_EQ(d.kappa, 4.0);
    EXPECT_DOUBLE_EQ(d.eta, 3.0);
    EXPECT_DOUBLE_EQ(drift_coefficients(lin, 1.0).eta, 0.0);
}

TEST(Schedules, ClampAndDomain) {
    const auto d = drift_coefficients(lin, 0.0);
    EXPECT_DOUBLE_EQ(d.t, kTimeFloor);
    EXPECT_DOUBLE_EQ(d.kappa, 1.0 / kTimeFloor);
    EXPECT_THROW(drift_coefficients(lin, -0.1), DomainError);
    EXPECT_THROW(drift_coefficients(lin, 1.5), DomainError);
    EXPECT_THROW(drift_coefficients(lin, std::nan("")), DomainError);
}

TEST(Schedules, LinearIdentities) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double t = u(rng);
        const auto d = drift_coefficients(lin, t);
        EXPECT_NEAR(d.kappa * t, 1.0, 1e-14);
        EXPECT_NEAR(d.eta * t, 1.0 - t, 1e-14);
    }
}

TEST(Schedules, SingularCustomSchedule) {
    // alpha stays 0 up to t = 0.01, so the clamp at 1e-3 cannot help
    auto s = InterpolantSchedule::custom([](double t) { return t < 0.01 ? 0.0 : (t - 0.01) / 0.99; },
                                         [](double t) { return 1.0 - t; }, [](double) { return 1.0 / 0.99; },
                                         [](double) { return -1.0; });
    EXPECT_THROW(drift_coefficients(s, 0.005), SingularityError);
}

TEST(Schedules, CustomBoundaryConditionsChecked) {
    EXPECT_THROW(InterpolantSchedule::custom([](double t) { return 0.5 * t; }, [](double t) { return 1.0 - t; },
                                             [](double) { return 0.5; }, [](double) { return -1.0; }),
                 ConfigError);
}

TEST(Schedules, CustomTrigSchedule) {
    const double h = std::numbers::pi / 2;
    auto s = InterpolantSchedule::custom([=](double t) { return std::sin(h * t); },
                                         [=](double t) { return std::cos(h * t); },
                                         [=](double t) { return h * std::cos(h * t); },
                                         [=](double t) { return -h * std::sin(h * t); });
    const double t = 0.3;
    const auto d = drift_coefficients(s, t);
    const double kappa = h / std::tan(h * t);
    EXPECT_NEAR(d.kappa, kappa, 1e-12);
    EXPECT_NEAR(d.eta, std::cos(h * t) * (kappa * std::cos(h * t) + h * std::sin(h * t)), 1e-12);
}

TEST(Schedules, VelocityIsIdentity) {
    const Vec v = testing_helpers::vec2(0.3, -1.2);
    EXPECT_EQ(to_velocity(Parameterization::Velocity, v, v * 2, 0.4, lin), v);
}

TEST(Schedules, ScoreConversion) {
    const Vec v = to_velocity(Parameterization::Score, vec1(-0.5), vec1(1.0), 0.5, lin);
    EXPECT_DOUBLE_EQ(v(0), 1.5);
}

TEST(Schedules, CleanDataConversion) {
    const Vec v = to_velocity(Parameterization::CleanData, vec1(0.0), vec1(1.0), 0.5, lin);
    EXPECT_DOUBLE_EQ(v(0), -2.0);
    EXPECT_THROW(to_velocity(Parameterization::CleanData, vec1(0.0), vec1(1.0), 1.0, lin), SingularityError);
}

TEST(Schedules, NoiseAndCleanDataAgreeWithPathVelocity) {
    // On a single path X_t = (1-t) e + t x1 the velocity is x1 - e; every row must recover it.
    const double t = 0.37, e = 0.8, x1 = -1.3;
    const Vec x = vec1((1 - t) * e + t * x1);
    EXPECT_NEAR(to_velocity(Parameterization::Noise, vec1(e), x, t, lin)(0), x1 - e, 1e-12);
    EXPECT_NEAR(to_velocity(Parameterization::CleanData, vec1(x1), x, t, lin)(0), x1 - e, 1e-12);
}

TEST(Schedules, ScoreRoundTrip) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ut(0.05, 0.95), ux(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        const double t = ut(rng);
        const Vec x = testing_helpers::vec2(ux(rng), ux(rng));
        const Vec v = testing_helpers::vec2(ux(rng), ux(rng));
        const Vec s = velocity_to_score(v, x, t, lin);
        const Vec back = to_velocity(Parameterization::Score, s, x, t, lin);
        EXPECT_LT((back - v).norm() / v.norm(), 1e-10);
    }
}

TEST(Schedules, SigmaValues) {
    EXPECT_NEAR(sigma(NoiseSchedule::memoryless(), 0.5, lin), std::sqrt(2.0), 1e-15);
    EXPECT_EQ(sigma(NoiseSchedule::zero(), 0.3, lin), 0.0);
    EXPECT_NEAR(sigma(NoiseSchedule::of(NoiseKind::SinSq), 0.5, lin), 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(sigma(NoiseSchedule::of(NoiseKind::OneMinusT), 0.25, lin), 0.75);
    EXPECT_DOUBLE_EQ(sigma(NoiseSchedule::of(NoiseKind::SigmaT), 0.25, lin), 0.75);
    EXPECT_THROW(sigma(NoiseSchedule::zero(), 1.1, lin), DomainError);
}

TEST(Schedules, MemorylessIdentity) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double t = u(rng);
        const double s = sigma(NoiseSchedule::memoryless(), t, lin);
        EXPECT_NEAR(s * s - 2.0 * drift_coefficients(lin, t).eta, 0.0, 1e-12 * (1.0 + s * s));
    }
}

TEST(Schedules, Keys) {
    EXPECT_EQ(noise_from_key("memoryless").kind, NoiseKind::Memoryless);
    EXPECT_EQ(noise_from_key("sin2").kind, NoiseKind::SinSq);
    EXPECT_EQ(noise_from_key("one_minus_t").kind, NoiseKind::OneMinusT);
    EXPECT_EQ(noise_from_key("sigma_t").kind, NoiseKind::SigmaT);
    EXPECT_EQ(noise_from_key("zero").kind, NoiseKind::Zero);
    EXPECT_EQ(noise_key(NoiseKind::SinSq), "sin2");
    EXPECT_THROW(noise_from_key("cosine"), ConfigError);
    EXPECT_EQ(schedule_from_key("linear").kind(), ScheduleKind::Linear);
    EXPECT_THROW(schedule_from_key("edm"), ConfigError);
}
