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

#pragma once

// Dynamic interconnection and damping injection control laws.
//
// Without delays each robot is coupled directly to the remote robot. With
// delays each robot is coupled to a local proxy, and only the proxies
// exchange (delayed) positions.

#include "teleop/dynamics.hpp"
#include "teleop/types.hpp"

namespace teleop {

/// Robot-side gains. K0, P and D are diagonal; the velocity-dependent gain is
/// K(qd) = K0 + sigma c |qd|^2 I.
struct GainSet {
    Diagonal k0;
    Diagonal p;
    Diagonal d;
    double sigma = 1.0;
    double c = 0.0; ///< Coriolis bound used in the gain schedule

    Eigen::Index dof() const noexcept { return k0.size(); }

    void validate(Eigen::Index dof) const
    {
        detail::require_dim(k0.size(), dof, "GainSet.K0");
        detail::require_dim(p.size(), dof, "GainSet.P");
        detail::require_dim(d.size(), dof, "GainSet.D");
        detail::require(detail::all_positive(k0), "GainSet.K0 must be positive definite");
        detail::require(detail::all_positive(p), "GainSet.P must be positive definite");
        detail::require(detail::all_positive(d), "GainSet.D must be positive definite");
        detail::require(sigma > 0.0 && std::isfinite(sigma), "GainSet.sigma must be positive");
        detail::require(c > 0.0 && std::isfinite(c), "GainSet.c must be positive");
    }
};

/// Gains of the delayed architecture. One instance is shared by master and
/// slave, which makes P_i, D_hat_i and the proxy-side parameters equal on both
/// sides by construction. `robot.p` is the robot-proxy stiffness P_i.
struct ProxyGainSet {
    Diagonal m_hat;
    Diagonal k_hat;
    Diagonal d_hat;
    Diagonal p_hat; ///< proxy-proxy stiffness
    double sigma_hat = 1.0;
    GainSet robot;

    const Diagonal& p_robot() const noexcept { return robot.p; }
    Eigen::Index dof() const noexcept { return m_hat.size(); }

    void validate(Eigen::Index dof) const
    {
        robot.validate(dof);
        detail::require_dim(m_hat.size(), dof, "ProxyGainSet.M_hat");
        detail::require_dim(k_hat.size(), dof, "ProxyGainSet.K_hat");
        detail::require_dim(d_hat.size(), dof, "ProxyGainSet.D_hat");
        detail::require_dim(p_hat.size(), dof, "ProxyGainSet.P_hat");
        detail::require(detail::all_positive(m_hat), "ProxyGainSet.M_hat must be positive definite");
        detail::require(detail::all_positive(k_hat), "ProxyGainSet.K_hat must be positive definite");
        detail::require(detail::all_positive(d_hat), "ProxyGainSet.D_hat must be positive definite");
        detail::require(detail::all_positive(p_hat), "ProxyGainSet.P_hat must be positive definite");
        detail::require(sigma_hat > 0.0 && std::isfinite(sigma_hat),
                        "ProxyGainSet.sigma_hat must be positive");
    }
};

/// K(qd) = K0 + sigma c |qd|^2 I, returned as its diagonal.
inline Diagonal dynamic_gain(const GainSet& g, const Vector& qdot)
{
    detail::require_dim(qdot.size(), g.k0.size(), "dynamic_gain: qdot");
    return g.k0.array() + g.sigma * g.c * qdot.squaredNorm();
}

/// s = qd_i + sigma (q_i - q_ref).
inline Vector sliding_surface(const Vector& qdot_i, const Vector& q_i, const Vector& q_ref,
                              double sigma)
{
    detail::require_dim(q_i.size(), qdot_i.size(), "sliding_surface: q_i");
    detail::require_dim(q_ref.size(), qdot_i.size(), "sliding_surface: q_ref");
    return qdot_i + sigma * (q_i - q_ref);
}

/// tau_i = -K(qd_i) s_i - P (q_i - q_j) - D qd_i, with s_i = qd_i + sigma (q_i - q_j).
inline Vector control_nodelay(const GainSet& g, const RobotState& state_i, const Vector& q_j)
{
    const Diagonal K = dynamic_gain(g, state_i.qdot);
    const Vector s = sliding_surface(state_i.qdot, state_i.q, q_j, g.sigma);
    const Vector e = state_i.q - q_j;
    return -K.cwiseProduct(s) - g.p.cwiseProduct(e) - g.d.cwiseProduct(state_i.qdot);
}

/// Same torque written as modulated stiffness and damping:
/// tau_i = -[P + sigma K(qd_i)] (q_i - q_j) - [D + K(qd_i)] qd_i.
inline Vector control_nodelay_modulated(const GainSet& g, const RobotState& state_i,
                                        const Vector& q_j)
{
    detail::require_dim(q_j.size(), state_i.q.size(), "control_nodelay_modulated: q_j");
    const Diagonal K = dynamic_gain(g, state_i.qdot);
    const Diagonal stiffness = g.p + g.sigma * K;
    const Diagonal damping = g.d + K;
    return -stiffness.cwiseProduct(state_i.q - q_j) - damping.cwiseProduct(state_i.qdot);
}

/// Robot-side law of the delayed architecture, coupling robot i to its proxy:
/// tau_i = -K(qd_i) s_i - P_i (q_i - qhat_i) - D qd_i, s_i = qd_i + sigma (q_i - qhat_i).
inline Vector control_delayed(const GainSet& g, const RobotState& state_i, const Vector& qhat_i)
{
    return control_nodelay(g, state_i, qhat_i);
}

/// Mismatch Delta_i = M_i(q_i)(qd_i - qd_j) + C_i(q_i, qd_i)(q_i - q_j) seen by
/// `side` in the undelayed loop. Diagnostic only.
inline Vector mismatch_nodelay(const ManipulatorParams& params, const RobotState& state_m,
                               const RobotState& state_s, Side side)
{
    const auto n = params.dof();
    state_m.validate(n);
    state_s.validate(n);
    const RobotState& mine = side == Side::master ? state_m : state_s;
    const RobotState& theirs = side == Side::master ? state_s : state_m;
    return mass_matrix(params, mine.q) * (mine.qdot - theirs.qdot) +
           coriolis_matrix(params, mine.q, mine.qdot) * (mine.q - theirs.q);
}

/// Right-hand side of the bound on s_i^T Delta_i in the undelayed loop:
/// lambda2 (s^T s + |qd_m|^2/2 + |qd_s|^2/2) + c (|qd_i|^2 s^T s + |q_m - q_s|^2 / 4).
inline double mismatch_bound_nodelay(const BoundConstants& b, const Vector& s_i,
                                     const Vector& qdot_i, const Vector& qdot_m,
                                     const Vector& qdot_s, const Vector& e)
{
    const double ss = s_i.squaredNorm();
    return b.lambda2 * (ss + 0.5 * qdot_m.squaredNorm() + 0.5 * qdot_s.squaredNorm()) +
           b.c * (qdot_i.squaredNorm() * ss + 0.25 * e.squaredNorm());
}

/// Mismatch of the delayed loop: M_i(q_i)(qd_i - qhatd_i) + C_i(q_i, qd_i)(q_i - qhat_i).
inline Vector mismatch_delayed(const ManipulatorParams& params, const RobotState& robot,
                               const RobotState& proxy)
{
    const auto n = params.dof();
    robot.validate(n);
    proxy.validate(n);
    return mass_matrix(params, robot.q) * (robot.qdot - proxy.qdot) +
           coriolis_matrix(params, robot.q, robot.qdot) * (robot.q - proxy.q);
}

/// lambda2 (s^T s + |qd_i|^2/2 + |qhatd_i|^2/2) + c (|qd_i|^2 s^T s + |q_i - qhat_i|^2 / 4).
inline double mismatch_bound_delayed(const BoundConstants& b, const Vector& s_i,
                                     const RobotState& robot, const RobotState& proxy)
{
    const double ss = s_i.squaredNorm();
    return b.lambda2 * (ss + 0.5 * robot.qdot.squaredNorm() + 0.5 * proxy.qdot.squaredNorm()) +
           b.c * (robot.qdot.squaredNorm() * ss + 0.25 * (robot.q - proxy.q).squaredNorm());
}

/// ehat_i = P_i (qhat_i - q_i) + P_hat (qhat_i - qhat_j).
inline Vector proxy_error(const ProxyGainSet& pg, const Vector& qhat_i, const Vector& q_i,
                          const Vector& qhat_j)
{
    const auto n = pg.dof();
    detail::require_dim(qhat_i.size(), n, "proxy_error: qhat_i");
    detail::require_dim(q_i.size(), n, "proxy_error: q_i");
    detail::require_dim(qhat_j.size(), n, "proxy_error: qhat_j");
    return pg.p_robot().cwiseProduct(qhat_i - q_i) + pg.p_hat.cwiseProduct(qhat_i - qhat_j);
}

/// Proxy acceleration driven by the local robot position and the delayed
/// remote proxy position qhat_jd:
/// M_hat qhatdd = -K_hat [qhatd + sigma_hat e_d] - D_hat qhatd - e_d,
/// e_d = P_i (qhat_i - q_i) + P_hat (qhat_i - qhat_jd).
inline Vector proxy_accel(const ProxyGainSet& pg, const RobotState& proxy_i, const Vector& q_i,
                          const Vector& qhat_jd)
{
    proxy_i.validate(pg.dof());
    const Vector e_d = proxy_error(pg, proxy_i.q, q_i, qhat_jd);
    const Vector force = -pg.k_hat.cwiseProduct(proxy_i.qdot + pg.sigma_hat * e_d) -
                         pg.d_hat.cwiseProduct(proxy_i.qdot) - e_d;
    return force.cwiseQuotient(pg.m_hat);
}

/// The same proxy acceleration recovered through the proxy sliding surface
/// shat = qhatd + sigma_hat ehat (ehat uses the undelayed qhat_j):
/// M_hat shatd = sigma_hat M_hat ehatd - ehat - K_hat shat
///               - (sigma_hat K_hat + I) P_hat (qhat_j - qhat_jd) - D_hat qhatd,
/// then qhatdd = shatd - sigma_hat ehatd.
inline Vector proxy_accel_sliding_form(const ProxyGainSet& pg, const RobotState& proxy_i,
                                       const RobotState& robot_i, const RobotState& proxy_j,
                                       const Vector& qhat_jd)
{
    const Vector ehat = proxy_error(pg, proxy_i.q, robot_i.q, proxy_j.q);
    const Vector ehat_dot = pg.p_robot().cwiseProduct(proxy_i.qdot - robot_i.qdot) +
                            pg.p_hat.cwiseProduct(proxy_i.qdot - proxy_j.qdot);
    const Vector shat = proxy_i.qdot + pg.sigma_hat * ehat;
    const Diagonal coupling = (pg.sigma_hat * pg.k_hat).array() + 1.0;
    const Vector m_shat_dot = pg.sigma_hat * pg.m_hat.cwiseProduct(ehat_dot) - ehat -
                              pg.k_hat.cwiseProduct(shat) -
                              coupling.cwiseProduct(pg.p_hat.cwiseProduct(proxy_j.q - qhat_jd)) -
                              pg.d_hat.cwiseProduct(proxy_i.qdot);
    return m_shat_dot.cwiseQuotient(pg.m_hat) - pg.sigma_hat * ehat_dot;
}

} // namespace teleop
