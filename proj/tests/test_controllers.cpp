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


#include "oracles.hpp"
#include "teleop/controllers.hpp"
#include "teleop/random.hpp"

#include <gtest/gtest.h>

namespace {

using namespace teleop;

Vector v2(double a, double b)
{
    Vector v(2);
    v << a, b;
    return v;
}

GainSet gains(double k0, double p, double d, double sigma, double c)
{
    GainSet g;
    g.k0 = Diagonal::Constant(2, k0);
    g.p = Diagonal::Constant(2, p);
    g.d = Diagonal::Constant(2, d);
    g.sigma = sigma;
    g.c = c;
    return g;
}

ProxyGainSet proxy_gains(double m, double k, double d, double p_robot, double p_hat, double sigma_hat)
{
    ProxyGainSet pg;
    pg.robot = gains(12.0, p_robot, 4.0, 1.0, 0.5);
    pg.m_hat = Diagonal::Constant(2, m);
    pg.k_hat = Diagonal::Constant(2, k);
    pg.d_hat = Diagonal::Constant(2, d);
    pg.p_hat = Diagonal::Constant(2, p_hat);
    pg.sigma_hat = sigma_hat;
    return pg;
}

TEST(DynamicGain, Schedule)
{
    const GainSet g = gains(10.0, 5.0, 2.0, 1.0, 0.5);
    EXPECT_EQ(dynamic_gain(g, v2(0, 0)), g.k0);
    const Diagonal K = dynamic_gain(g, v2(2.0, 0.0));
    EXPECT_DOUBLE_EQ(K[0], 12.0);
    EXPECT_DOUBLE_EQ(K[1], 12.0);
    const Vector qd = v2(0.3, -1.1);
    const Diagonal inc1 = dynamic_gain(g, qd) - g.k0;
    const Diagonal inc2 = dynamic_gain(g, 2.0 * qd) - g.k0;
    EXPECT_LT((inc2 - 4.0 * inc1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SlidingSurface, Examples)
{
    EXPECT_EQ(sliding_surface(v2(0, 0), v2(0.3, 0.1), v2(0.3, 0.1), 2.0).norm(), 0.0);
    const Vector s = sliding_surface(v2(1.0, 0.0), v2(0.5, -1.0), v2(0.0, 0.0), 2.0);
    EXPECT_DOUBLE_EQ(s[0], 2.0);
    EXPECT_DOUBLE_EQ(s[1], -2.0);

    Rng rng(1);
    const Vector qm = rng.normal_vector(2);
    const Vector qs = rng.normal_vector(2);
    const Vector qdm = rng.normal_vector(2);
    const Vector qds = rng.normal_vector(2);
    const Vector sum = sliding_surface(qdm, qm, qs, 0.7) + sliding_surface(qds, qs, qm, 0.7);
    EXPECT_LT((sum - qdm - qds).norm(), 1e-14);
    EXPECT_THROW(sliding_surface(v2(0, 0), Vector::Zero(3), v2(0, 0), 1.0), InputError);
}

TEST(ControlNodelay, Examples)
{
    const GainSet g = gains(10.0, 5.0, 2.0, 1.0, 0.5);
    const RobotState rest{v2(0.4, 0.2), v2(0, 0)};
    EXPECT_EQ(control_nodelay(g, rest, rest.q).norm(), 0.0);

    const RobotState st{v2(0.1, 0.0), v2(0, 0)};
    const Vector tau = control_nodelay(g, st, v2(0, 0));
    EXPECT_NEAR(tau[0], -1.5, 1e-14);
    EXPECT_NEAR(tau[1], 0.0, 1e-14);
    const Vector tau_mod = control_nodelay_modulated(g, st, v2(0, 0));
    EXPECT_NEAR(tau_mod[0], -1.5, 1e-14);
    EXPECT_NEAR(tau_mod[1], 0.0, 1e-14);
}

TEST(ControlNodelay, FormsAgreeAndMatchOracle)
{
    Rng rng(2);
    for (int k = 0; k < 500; ++k) {
        const double k0 = rng.uniform(1, 20), p = rng.uniform(1, 40), d = rng.uniform(0.5, 10);
        const double sigma = rng.uniform(0.1, 2), c = rng.uniform(0.1, 1);
        const GainSet g = gains(k0, p, d, sigma, c);
        const RobotState st{rng.normal_vector(2), rng.normal_vector(2)};
        const Vector qj = rng.normal_vector(2);
        const Vector a = control_nodelay(g, st, qj);
        const Vector b = control_nodelay_modulated(g, st, qj);
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()));
        EXPECT_LT((a - oracle::nodelay_torque(k0, sigma, c, p, d, st.q, st.qdot, qj)).norm(), 1e-11);

        // Synchronized positions leave only the damping path.
        const Vector sync = control_nodelay(g, st, st.q);
        const Diagonal K = dynamic_gain(g, st.qdot);
        EXPECT_LT((sync + (g.d + K).cwiseProduct(st.qdot)).norm(), 1e-12);
    }
}

TEST(ControlDelayed, EqualsUndelayedLawWithProxyReference)
{
    const GainSet g = gains(10.0, 5.0, 2.0, 1.0, 0.5);
    const RobotState st{v2(0.1, 0.0), v2(0, 0)};
    EXPECT_EQ(control_delayed(g, st, v2(0, 0)), control_nodelay(g, st, v2(0, 0)));
    const RobotState rest{v2(0.3, 0.3), v2(0, 0)};
    EXPECT_EQ(control_delayed(g, rest, rest.q).norm(), 0.0);

    Rng rng(4);
    for (int k = 0; k < 100; ++k) {
        const RobotState s{rng.normal_vector(2), rng.normal_vector(2)};
        const Vector qh = rng.normal_vector(2);
        const Vector a = control_delayed(g, s, qh);
        const Vector b = control_nodelay_modulated(g, s, qh);
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()));
    }
}

TEST(Mismatch, Nodelay)
{
    const auto arm = ManipulatorParams::two_link_reference();
    const RobotState a{v2(0.3, 0.7), v2(0.5, -0.2)};
    EXPECT_EQ(mismatch_nodelay(arm, a, a, Side::master).norm(), 0.0);

    // Elbow at zero kills C, equal velocities kill the inertia term.
    const RobotState m{v2(0.1, 0.0), v2(0.4, 0.4)};
    const RobotState s{v2(0.6, 0.3), v2(0.4, 0.4)};
    EXPECT_LT(mismatch_nodelay(arm, m, s, Side::master).norm(), 1e-15);

    const BoundConstants b = estimate_bounds(arm);
    Rng rng(6);
    for (int k = 0; k < 2000; ++k) {
        const RobotState sm{rng.uniform_vector(2, -3, 3), rng.normal_vector(2) * 2.0};
        const RobotState ss{rng.uniform_vector(2, -3, 3), rng.normal_vector(2) * 2.0};
        const double sigma = rng.uniform(0.1, 2.0);
        for (Side side : kSides) {
            const RobotState& me = side == Side::master ? sm : ss;
            const RobotState& them = side == Side::master ? ss : sm;
            const Vector sv = sliding_surface(me.qdot, me.q, them.q, sigma);
            const double lhs = sv.dot(mismatch_nodelay(arm, sm, ss, side));
            const double rhs = mismatch_bound_nodelay(b, sv, me.qdot, sm.qdot, ss.qdot, sm.q - ss.q);
            EXPECT_LE(lhs, rhs);
        }
    }
}

TEST(Mismatch, Delayed)
{
    const auto arm = ManipulatorParams::two_link_reference();
    const BoundConstants b = estimate_bounds(arm);
    Rng rng(8);
    for (int k = 0; k < 2000; ++k) {
        const RobotState r{rng.uniform_vector(2, -3, 3), rng.normal_vector(2) * 2.0};
        const RobotState h{rng.uniform_vector(2, -3, 3), rng.normal_vector(2) * 2.0};
        const Vector sv = sliding_surface(r.qdot, r.q, h.q, rng.uniform(0.1, 2.0));
        EXPECT_LE(sv.dot(mismatch_delayed(arm, r, h)), mismatch_bound_delayed(b, sv, r, h));
    }
}

TEST(ProxyError, Examples)
{
    const ProxyGainSet pg = proxy_gains(1, 2, 1, 5.0, 3.0, 0.5);
    const Vector same = v2(0.2, -0.1);
    EXPECT_EQ(proxy_error(pg, same, same, same).norm(), 0.0);

    const Vector e = proxy_error(pg, v2(0.1, 0.2), v2(0.0, 0.2), v2(0.1, 0.0));
    EXPECT_NEAR(e[0], 0.5, 1e-15);
    EXPECT_NEAR(e[1], 0.6, 1e-15);

    Rng rng(10);
    const Vector qhm = rng.normal_vector(2), qhs = rng.normal_vector(2);
    const Vector qm = rng.normal_vector(2), qs = rng.normal_vector(2);
    const Vector sum = proxy_error(pg, qhm, qm, qhs) + proxy_error(pg, qhs, qs, qhm);
    EXPECT_LT((sum - 5.0 * ((qhm - qm) + (qhs - qs))).norm(), 1e-14);
}

TEST(ProxyAccel, Examples)
{
    const ProxyGainSet pg = proxy_gains(1.0, 2.0, 1.0, 1.0, 1.0, 0.5);
    const RobotState rest{v2(0.3, 0.3), v2(0, 0)};
    EXPECT_EQ(proxy_accel(pg, rest, rest.q, rest.q).norm(), 0.0);

    const RobotState proxy{v2(0.1, 0.0), v2(0, 0)};
    const Vector a = proxy_accel(pg, proxy, v2(0, 0), v2(0, 0));
    EXPECT_NEAR(a[0], -0.4, 1e-15);
    EXPECT_NEAR(a[1], 0.0, 1e-15);
}

TEST(ProxyAccel, SlidingFormAgrees)
{
    Rng rng(12);
    for (int k = 0; k < 500; ++k) {
        ProxyGainSet pg = proxy_gains(rng.uniform(0.2, 3), rng.uniform(0.5, 10), rng.uniform(0.5, 5),
                                      rng.uniform(0.5, 20), rng.uniform(0.5, 20), rng.uniform(0.05, 1));
        pg.m_hat[1] *= 1.7;
        const RobotState proxy_i{rng.normal_vector(2), rng.normal_vector(2)};
        const RobotState robot_i{rng.normal_vector(2), rng.normal_vector(2)};
        const RobotState proxy_j{rng.normal_vector(2), rng.normal_vector(2)};
        const Vector qhat_jd = proxy_j.q + 0.1 * rng.normal_vector(2);
        const Vector a = proxy_accel(pg, proxy_i, robot_i.q, qhat_jd);
        const Vector b = proxy_accel_sliding_form(pg, proxy_i, robot_i, proxy_j, qhat_jd);
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()));
    }
}

TEST(Gains, ValidationRejectsNonPositive)
{
    GainSet g = gains(10, 5, 2, 1, 0.5);
    EXPECT_NO_THROW(g.validate(2));
    EXPECT_THROW(g.validate(3), InputError);
    g.d[0] = 0.0;
    EXPECT_THROW(g.validate(2), InputError);
    ProxyGainSet pg = proxy_gains(1, 2, 1, 1, 1, 0.5);
    pg.sigma_hat = 0.0;
    EXPECT_THROW(pg.validate(2), InputError);
}

} // namespace
