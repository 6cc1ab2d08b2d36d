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

// Lyapunov candidate of the undelayed loop and Lyapunov-Krasovskii
// functional V = V1 + V2 of the delayed loop.

#include "teleop/controllers.hpp"
#include "teleop/delay_channel.hpp"
#include "teleop/dynamics.hpp"
#include "teleop/types.hpp"

#include <array>
#include <cmath>

namespace teleop {

struct LyapunovSample {
    double t = 0.0;
    double V = 0.0;
    double V1 = 0.0;
    double V2 = 0.0; ///< zero in the undelayed loop
    SidePair<double> s_norm{0.0, 0.0};
    double e_norm = 0.0; ///< |q_m - q_s|
};

/// V = 1/2 sum_i s_i^T M_i(q_i) s_i + 1/2 (q_m - q_s)^T P (q_m - q_s).
inline LyapunovSample lyapunov_nodelay(const SidePair<ManipulatorParams>& params, const GainSet& g,
                                       const RobotState& state_m, const RobotState& state_s)
{
    const SidePair<const RobotState*> st{&state_m, &state_s};
    LyapunovSample out;
    double V = 0.0;
    for (Side s : kSides) {
        const RobotState& me = *st[s];
        const RobotState& them = *st[other(s)];
        me.validate(params[s].dof());
        const Vector sv = sliding_surface(me.qdot, me.q, them.q, g.sigma);
        V += 0.5 * sv.dot(mass_matrix(params[s], me.q) * sv);
        out.s_norm[s] = sv.norm();
    }
    const Vector e = state_m.q - state_s.q;
    V += 0.5 * e.dot(g.p.cwiseProduct(e));
    out.V = V;
    out.V1 = V;
    out.V2 = 0.0;
    out.e_norm = e.norm();
    return out;
}

/// Robot and proxy part V1 of the delayed-loop functional.
inline double lyapunov_delayed_v1(const SidePair<ManipulatorParams>& params,
                                  const ProxyGainSet& pg, const SidePair<RobotState>& robots,
                                  const SidePair<RobotState>& proxies,
                                  SidePair<double>* s_norm = nullptr)
{
    double V1 = 0.0;
    for (Side s : kSides) {
        const RobotState& r = robots[s];
        const RobotState& h = proxies[s];
        r.validate(params[s].dof());
        h.validate(params[s].dof());
        const Vector sv = sliding_surface(r.qdot, r.q, h.q, pg.robot.sigma);
        const Vector x = r.q - h.q;
        const Vector ehat = proxy_error(pg, h.q, r.q, proxies[other(s)].q);
        const Vector shat = h.qdot + pg.sigma_hat * ehat;
        V1 += 0.5 * sv.dot(mass_matrix(params[s], r.q) * sv);
        V1 += 0.5 * x.dot(pg.p_robot().cwiseProduct(x));
        V1 += 0.5 * shat.dot(pg.m_hat.cwiseProduct(shat));
        if (s_norm != nullptr) {
            (*s_norm)[s] = sv.norm();
        }
    }
    const Vector xh = proxies.master.q - proxies.slave.q;
    V1 += 0.5 * xh.dot(pg.p_hat.cwiseProduct(xh));
    return V1;
}

/// Double integral of e^{-gamma (t - xi)} f(xi) over -d_bar <= theta <= 0,
/// t + theta <= xi <= t, rewritten as int_0^{d_bar} e^{-gamma u} (d_bar - u) f(t - u) du.
/// f is taken piecewise linear between nodes spaced `step` apart; each panel is
/// integrated against the exact weight with 3-point Gauss-Legendre.
template <class F>
double krasovskii_integral(F&& f_at, double t, double d_bar, double gamma, double step)
{
    if (d_bar <= 0.0) {
        return 0.0;
    }
    detail::require(step > 0.0, "krasovskii_integral: step must be positive");
    static constexpr std::array<double, 3> kNodes{-0.7745966692414834, 0.0, 0.7745966692414834};
    static constexpr std::array<double, 3> kWeights{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const auto weight = [&](double u) { return std::exp(-gamma * u) * (d_bar - u); };

    // Panels end on multiples of `step` so nodes coincide with stored samples.
    const auto panels = static_cast<long>(std::ceil(d_bar / step - 1e-9));
    double total = 0.0;
    double a = 0.0;
    double fa = f_at(t);
    for (long k = 1; k <= panels; ++k) {
        const double b = k == panels ? d_bar : static_cast<double>(k) * step;
        const double fb = f_at(t - b);
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        for (std::size_t g = 0; g < 3; ++g) {
            const double u = mid + half * kNodes[g];
            const double lam = (u - a) / (b - a);
            total += kWeights[g] * half * weight(u) * ((1.0 - lam) * fa + lam * fb);
        }
        a = b;
        fa = fb;
    }
    return total;
}

/// Closed form of int_0^{d_bar} e^{-gamma u} (d_bar - u) du.
inline double krasovskii_weight_mass(double d_bar, double gamma)
{
    return (d_bar - (1.0 - std::exp(-gamma * d_bar)) / gamma) / gamma;
}

/// Krasovskii part V2 for one side. `history` stores the stacked proxy state
/// [qhat; qhatdot] of that side; only the velocity half enters.
inline double krasovskii_term(const SignalHistory& history, double t, double d_bar, double gamma,
                              const Diagonal& Q, double step)
{
    const auto n = Q.size();
    auto f = [&](double xi) {
        const Vector v = history.sample(xi).tail(n);
        return v.dot(Q.cwiseProduct(v));
    };
    return krasovskii_integral(f, t, d_bar, gamma, step);
}

struct KrasovskiiParams {
    double gamma = 0.5;
    SidePair<double> d_bar{0.0, 0.0};
    SidePair<Diagonal> q;
    double step = 1e-3; ///< quadrature node spacing, normally the simulation step
};

/// V = V1 + V2 of the delayed loop at time t.
inline LyapunovSample lyapunov_delayed(const SidePair<ManipulatorParams>& params,
                                       const ProxyGainSet& pg, const SidePair<RobotState>& robots,
                                       const SidePair<RobotState>& proxies,
                                       const SidePair<const SignalHistory*>& histories, double t,
                                       const KrasovskiiParams& kp)
{
    LyapunovSample out;
    out.t = t;
    out.V1 = lyapunov_delayed_v1(params, pg, robots, proxies, &out.s_norm);
    double V2 = 0.0;
    for (Side s : kSides) {
        if (kp.d_bar[s] <= 0.0) {
            continue;
        }
        detail::require(histories[s] != nullptr, "lyapunov_delayed: missing history");
        detail::require_dim(kp.q[s].size(), params[s].dof(), "lyapunov_delayed: Q");
        V2 += krasovskii_term(*histories[s], t, kp.d_bar[s], kp.gamma, kp.q[s], kp.step);
    }
    out.V2 = V2;
    out.V = out.V1 + V2;
    out.e_norm = (robots.master.q - robots.slave.q).norm();
    return out;
}

} // namespace teleop
