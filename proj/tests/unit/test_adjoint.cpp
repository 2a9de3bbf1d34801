#include "flowam/adjoint.hpp"
#include "flowam/errors.hpp"
#include "flowam/nnet.hpp"
#include "flowam/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"

using namespace flowam;
using testing_helpers::max_rel_err;
using testing_helpers::vec1;
using testing_helpers::vec2;

namespace {

VelocityField net2() {
    Architecture a;
    a.state_dim = 2;
    a.hidden = {12, 12};
    a.activation = Activation::Tanh;
    return VelocityField(a, 8);
}

}  // namespace

TEST(Adjoint, ZeroTerminalGradientStaysZero) {
    const auto f = net2();
    const auto tr = sample_ode(f, 20, vec2(0.4, -0.3));
    const auto a = lean_adjoint_full(f, tr, Vec::Zero(2));
    for (const auto& v : a.adjoints) EXPECT_EQ(v.norm(), 0.0);
}

TEST(Adjoint, LinearFieldClosedForm) {
    // v = 0.7 x: a(0) = a1 (1 + 0.7 h)^N -> a1 e^{0.7}
    const auto f = LinearField::scalar(1, 0.7);
    const int n = 2000;
    const auto tr = sample_ode(f, n, vec1(1.0));
    const auto a = lean_adjoint_full(f, tr, vec1(2.0));
    EXPECT_EQ(a.first_index, 0);
    EXPECT_EQ(a.size(), n + 1);
    EXPECT_NEAR(a.at_grid(0)(0), 2.0 * std::exp(0.7), 1e-3);
    EXPECT_NEAR(a.at_grid(0)(0), 2.0 * std::pow(1.0 + 0.7 / n, n), 1e-10);
}

TEST(Adjoint, WindowLayout) {
    const auto f = net2();
    const auto tr = sample_ode(f, 10, vec2(0.1, 0.2));
    const Vec g = vec2(1.0, -1.0);
    const auto one = lean_adjoint(f, tr, g, 1);
    EXPECT_EQ(one.size(), 1);
    EXPECT_EQ(one.first_index, 10);
    EXPECT_EQ(one.window.front(), 1.0);
    EXPECT_EQ(one.adjoints.back(), g);
    const auto four = lean_adjoint(f, tr, g, 4);
    EXPECT_EQ(four.first_index, 7);
    EXPECT_EQ(four.last_index(), 10);
    EXPECT_DOUBLE_EQ(four.window.front(), 0.7);
    EXPECT_THROW(lean_adjoint(f, tr, g, 0), ShapeError);
    EXPECT_THROW(lean_adjoint(f, tr, g, 12), ShapeError);
    EXPECT_THROW(lean_adjoint(f, tr, vec1(1.0), 3), ShapeError);
}

TEST(Adjoint, TruncationIsAPrefixOfTheFullRecursion) {
    const auto f = net2();
    const auto tr = sample_ode(f, 30, vec2(-0.5, 0.9));
    const Vec g = vec2(0.3, 0.7);
    const auto full = lean_adjoint_full(f, tr, g);
    for (int t : {1, 5, 17, 30}) {
        const auto part = lean_adjoint(f, tr, g, t);
        for (int k = part.first_index; k <= part.last_index(); ++k) EXPECT_EQ(part.at_grid(k), full.at_grid(k));
    }
}

TEST(Adjoint, LinearInTerminalGradient) {
    const auto f = net2();
    const auto tr = sample_ode(f, 25, vec2(0.2, 0.2));
    const Vec g1 = vec2(1.0, 0.0), g2 = vec2(0.0, 1.0);
    const auto a1 = lean_adjoint_full(f, tr, g1);
    const auto a2 = lean_adjoint_full(f, tr, g2);
    const auto a3 = lean_adjoint_full(f, tr, 2.0 * g1 - 3.0 * g2);
    for (int k = 0; k <= 25; ++k)
        EXPECT_LT(max_rel_err(a3.at_grid(k), 2.0 * a1.at_grid(k) - 3.0 * a2.at_grid(k)), 1e-13);
}

TEST(Adjoint, MatchesFiniteDifferencesOfTheDiscreteFlow) {
    const auto f = net2();
    const auto tr = sample_ode(f, 40, vec2(0.6, -1.1));
    const auto r = RewardFn::quadratic_well(vec2(2.0, 0.0), 1.0);
    for (int k : {0, 13, 39, 40}) {
        const auto chk = verify_adjoint_fd(f, tr, r, k, 1e-5);
        EXPECT_LT(chk.max_rel_err, 1e-7) << "k=" << k;
    }
}

TEST(Adjoint, RectifiedFlowAgreesWithClosedForm) {
    const GaussianFlowSpec spec{1.5, 0.7};
    const RfVelocityField f(spec);
    const int n = 4000;
    const auto tr = sample_ode(f, n, vec1(0.3));
    const auto a = lean_adjoint_full(f, tr, vec1(1.0));
    for (int k : {0, 1000, 2000, 3500}) EXPECT_NEAR(a.at_grid(k)(0), rf_adjoint(spec, 1.0, k / double(n)), 1e-3);
}

TEST(Adjoint, SdeWithZeroNoiseEqualsOde) {
    const auto f = net2();
    const auto tr = sample_ode(f, 20, vec2(0.3, 0.1));
    const Vec g = vec2(-0.4, 0.8);
    const auto ode = lean_adjoint_full(f, tr, g);
    const auto sde = lean_adjoint_sde_full(f, InterpolantSchedule::linear(), NoiseSchedule::zero(), tr, g);
    for (int k = 0; k <= 20; ++k) EXPECT_EQ(ode.at_grid(k), sde.at_grid(k));
}

TEST(Adjoint, SdeStepIsTheDriftJacobianTranspose) {
    // one backward step equals a + h J_b^T a with J_b from finite differences of the SDE drift
    const auto f = net2();
    const auto sched = InterpolantSchedule::linear();
    const auto ns = NoiseSchedule::memoryless();
    Rng rng(3);
    const int n = 10;
    const auto tr = sample_sde(f, sched, ns, n, vec2(0.5, -0.2), kNoCond, rng);
    const Vec g = vec2(0.9, -0.6);
    const auto a = lean_adjoint_sde(f, sched, ns, tr, g, 2);
    const double h = 1.0 / n;
    const int k = n - 1;
    const auto c = sde_coefficients(sched, ns, tr.times[k], h);
    auto drift = [&](const Vec& x) {
        const Vec v = f.velocity(x, tr.times[k], kNoCond);
        return Vec(v + c.correction * (v - c.kappa * x));
    };
    Vec expect = g;
    const Vec& x = tr.states[k];
    for (int i = 0; i < 2; ++i) {
        Vec xp = x, xm = x;
        xp(i) += 1e-6;
        xm(i) -= 1e-6;
        expect(i) += h * g.dot(drift(xp) - drift(xm)) / 2e-6;
    }
    EXPECT_LT(max_rel_err(a.at_grid(k), expect), 1e-8);
}

TEST(Adjoint, BlowupIsReported) {
    const auto f = LinearField::scalar(1, 1e14);
    Trajectory tr;
    tr.times = uniform_grid(2);
    tr.states = {vec1(0.0), vec1(0.0), vec1(0.0)};
    EXPECT_THROW(lean_adjoint_full(f, tr, vec1(1.0)), NonFiniteError);
}

TEST(Adjoint, NormCsvRows) {
    const auto f = LinearField::scalar(1, 0.0);
    const auto tr = sample_ode(f, 4, vec1(1.0));
    const auto a = lean_adjoint(f, tr, vec1(-2.0), 2);
    std::string csv;
    append_adjoint_norms(csv, 3, a);
    EXPECT_EQ(csv, "3,0.75,2\n3,1,2\n");
}
