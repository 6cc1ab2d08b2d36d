// Copyright 2026 The teleop-iss Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "teleop/analysis.hpp"
#include "teleop/presets.hpp"
#include "teleop/random.hpp"
#include "teleop/suite.hpp"

#include <gtest/gtest.h>

namespace {

using namespace teleop;

Vector v2(double a, double b)
{
    Vector v(2);
    v << a, b;
    return v;
}

TEST(Lyapunov, NodelayZeroAndPendulum)
{
    const auto arm = ManipulatorParams::two_link_reference();
    const auto g = presets::nodelay_presets().front().gains;
    EXPECT_EQ(lyapunov_nodelay({arm, arm}, g, RobotState::zero(2), RobotState::zero(2)).V, 0.0);

    const auto pend = ManipulatorParams::pendulum(1.0, 1.0, 0.5, 0.75);
    GainSet pg;
    pg.k0 = Diagonal::Constant(1, 5.0);
    pg.p = Diagonal::Constant(1, 10.0);
    pg.d = Diagonal::Constant(1, 1.0);
    pg.sigma = 1.0;
    pg.c = 1.0;
    const RobotState m{Vector::Constant(1, 0.1), Vector::Zero(1)};
    const RobotState s = RobotState::zero(1);
    const auto ls = lyapunov_nodelay({pend, pend}, pg, m, s);
    EXPECT_NEAR(ls.V, 0.06, 1e-14);
    EXPECT_NEAR(ls.e_norm, 0.1, 1e-15);
    EXPECT_EQ(ls.V2, 0.0);
}

SignalHistory constant_velocity_history(double d_bar, double step, const Vector& w, double t_end)
{
    const auto n = w.size();
    Vector v0(2 * n);
    v0 << Vector::Zero(n), w;
    auto h = SignalHistory::constant(d_bar, step, v0);
    for (double t = 0.0; t <= t_end + 1e-12; t += step) {
        Vector v(2 * n);
        v << w * t, w;
        h.push(t, v);
    }
    return h;
}

TEST(Lyapunov, KrasovskiiClosedForm)
{
    const double step = 1e-3, gamma = 0.5, q = 1.7;
    const Vector w = v2(0.3, -0.4);
    for (double d_bar : {0.1, 0.25, 0.5}) {
        const auto h = constant_velocity_history(d_bar, step, w, 2.0);
        const double V2 = krasovskii_term(h, h.last_time(), d_bar, gamma, Diagonal::Constant(2, q), step);
        const double expected = q * w.squaredNorm() * (d_bar - (1.0 - std::exp(-gamma * d_bar)) / gamma) / gamma;
        EXPECT_NEAR(V2, expected, 1e-12 * expected);
        EXPECT_NEAR(krasovskii_weight_mass(d_bar, gamma) * q * w.squaredNorm(), expected, 1e-15);
    }
    const auto rest = constant_velocity_history(0.5, step, v2(0.0, 0.0), 1.0);
    EXPECT_EQ(krasovskii_term(rest, rest.last_time(), 0.5, gamma, Diagonal::Constant(2, q), step), 0.0);
}

TEST(Lyapunov, KrasovskiiWindowBound)
{
    Rng rng(41);
    const double step = 1e-3;
    for (int k = 0; k < 50; ++k) {
        const double d_bar = rng.uniform(0.01, 0.8);
        const double gamma = rng.uniform(0.05, 2.0);
        const Vector qd = rng.uniform_vector(2, 0.1, 3.0);
        const Vector f = rng.uniform_vector(2, 0.1, 8.0);
        auto h = SignalHistory::constant(d_bar, step, Vector::Zero(4));
        double sup = 0.0;
        for (int i = 0; i <= 2000; ++i) {
            const double t = i * step;
            Vector v(4);
            v << Vector::Zero(2), (f * t).array().sin().matrix();
            h.push(t, v);
            if (t >= 2.0 - d_bar - 1e-12) {
                sup = std::max(sup, v.tail(2).squaredNorm());
            }
        }
        const double V2 = krasovskii_term(h, 2.0, d_bar, gamma, qd, step);
        EXPECT_GE(V2, 0.0);
        EXPECT_LE(V2, 0.5 * d_bar * d_bar * qd.maxCoeff() * sup * (1.0 + 1e-9));
    }
}

TEST(Analysis, EquilibriumTracePassesTrivially)
{
    Scenario sc = presets::nodelay_scenario("eq", presets::nodelay_presets().front());
    sc.initial.master.q = v2(0.0, 0.0);
    sc.duration = 1.0;
    const auto tr = run(sc);
    const auto r = analyze(tr);
    EXPECT_TRUE(r.decay.pass);
    EXPECT_TRUE(r.iss.pass);
    EXPECT_EQ(r.sets.attractive_radius_sq, 0.0);
    EXPECT_TRUE(r.pass());
    EXPECT_FALSE(r.decay.fitted_rate.has_value());
}

TEST(Analysis, FittedRateMeetsCertifiedKappa)
{
    for (const auto& p : presets::nodelay_presets()) {
        const auto tr = run(presets::nodelay_scenario(p.name, p));
        const auto r = analyze(tr);
        ASSERT_TRUE(r.decay.fitted_rate.has_value());
        EXPECT_GE(*r.decay.fitted_rate, 0.9 * r.kappa) << p.name;
        EXPECT_TRUE(r.pass()) << render_report(r);
        EXPECT_LT(tr.samples.back().e_norm, 1e-3);
    }
}

TEST(Analysis, StepDisturbanceAttractiveSet)
{
    Scenario sc = presets::nodelay_scenario("step", presets::nodelay_presets().front());
    sc.torque.master = TorqueProfile::step(v2(1.0, 0.0), 1.0);
    const auto tr = run(sc);
    const auto r = analyze(tr);
    EXPECT_NEAR(r.sets.attractive_radius_sq, 0.05, 1e-15);
    EXPECT_TRUE(r.sets.entered);
    EXPECT_TRUE(r.sets.remains);
    EXPECT_TRUE(r.sets.invariant);
    EXPECT_LE(r.sets.max_error_sq, r.sets.invariant_radius_sq);
    EXPECT_TRUE(r.pass()) << render_report(r);
}

TEST(Analysis, NegativeControlIsFlagged)
{
    int flagged = 0;
    for (std::size_t k = 0; k < 5; ++k) {
        const auto sc = suites::negative_scenario(1, k);
        const auto tr = run(sc);
        EXPECT_FALSE(tr.meta.certificate.pass);
        const auto r = analyze(tr);
        EXPECT_FALSE(r.pass());
        flagged += (tr.diverged() || !r.decay.pass) ? 1 : 0;
    }
    EXPECT_GE(flagged, 4);
}

TEST(Analysis, DelayedRunChecks)
{
    Scenario sc = presets::delayed_scenario("dl", presets::delayed_presets().front(),
                                            presets::sinusoidal_delays(0.25, 0.2, 0.5, 0.5));
    sc.torque = suites::delayed_torque();
    const auto tr = run(sc);
    const auto r = analyze(tr, suites::delayed_options());
    EXPECT_EQ(r.mismatch.violations, 0u);
    EXPECT_EQ(r.mismatch.evaluated, 2 * tr.samples.size());
    EXPECT_TRUE(r.sandwich.pass());
    EXPECT_GE(r.v2_min, 0.0);
    EXPECT_TRUE(r.pass()) << render_report(r);
    EXPECT_NEAR(r.sets.attractive_radius_sq,
                tr.meta.tau_bar * tr.meta.tau_bar /
                    (tr.meta.certificate.p_prime * r.kappa * tr.meta.certificate.omega),
                1e-15);
}

TEST(Analysis, IssEstimateWithZeroInput)
{
    const auto tr = run(presets::nodelay_scenario("iss", presets::nodelay_presets()[2]));
    const auto iss = iss_estimate_check(tr);
    EXPECT_TRUE(iss.pass);
    EXPECT_EQ(iss.u_sup, 0.0);
    EXPECT_NEAR(iss.x0, 0.5, 1e-15);
}

TEST(Analysis, RejectsEmptyTrace)
{
    SimulationTrace tr;
    EXPECT_THROW(analyze(tr), InputError);
}

TEST(LemmaProbe, TrivialCases)
{
    const Matrix ups = (Matrix(2, 2) << 2.0, 0.3, 0.3, 1.0).finished();
    auto zero_b = [](double) { return Vector::Zero(2); };
    auto some_b = [](double t) { return v2(std::sin(t), std::cos(3.0 * t)); };
    EXPECT_GE(lemma_L1_margin(ups, v2(1.0, -2.0), zero_b, 1.0, 0.4), 0.0);
    EXPECT_GE(lemma_L1_margin(ups, v2(0.0, 0.0), some_b, 1.0, 0.4), 0.0);
    // Equality for constant b = Upsilon^{-1} a.
    const Vector a = v2(0.7, 0.2);
    const Vector b = ups.llt().solve(a);
    EXPECT_NEAR(lemma_L1_margin(ups, a, [&](double) { return b; }, 2.0, 0.3), 0.0, 1e-12);
}

TEST(LemmaProbe, RandomInstances)
{
    const auto r = lemma_L1_probe(200, 5);
    EXPECT_EQ(r.instances, 200u);
    EXPECT_EQ(r.violations, 0u);
    EXPECT_GE(r.worst_margin, -1e-10);
}

} // namespace
