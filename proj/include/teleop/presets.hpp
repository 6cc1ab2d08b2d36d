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

// Named gain sets and scenario builders for the reference two-link arm.

#include "teleop/simulator.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace teleop::presets {

inline Diagonal diag(Eigen::Index n, double v) { return Diagonal::Constant(n, v); }

/// Coriolis bound covering both reference arms at the default safety factor.
inline double reference_c()
{
    static const double c = estimate_bounds(ManipulatorParams::two_link_reference()).c;
    return c;
}

struct NodelayPreset {
    std::string name;
    GainSet gains;
    TheoremParams theorem;
};

inline NodelayPreset nodelay_preset(std::string name, double sigma, double mu, double k0, double p,
                                    double d, double kappa)
{
    NodelayPreset out;
    out.name = std::move(name);
    out.gains.k0 = diag(2, k0);
    out.gains.p = diag(2, p);
    out.gains.d = diag(2, d);
    out.gains.sigma = sigma;
    out.gains.c = reference_c();
    out.theorem.mu = {mu, mu};
    out.theorem.omega = {1.0, 1.0};
    out.theorem.kappa = kappa;
    return out;
}

/// Certified undelayed gain sets for the reference arm.
inline std::vector<NodelayPreset> nodelay_presets()
{
    return {
        nodelay_preset("nd-a", 1.0, 2.0, 12.0, 20.0, 8.0, 0.5),
        nodelay_preset("nd-b", 0.5, 2.0, 8.0, 10.0, 4.0, 0.5),
        nodelay_preset("nd-c", 2.0, 4.0, 15.0, 40.0, 15.0, 0.5),
        nodelay_preset("nd-d", 1.0, 2.0, 20.0, 40.0, 10.0, 1.0),
        nodelay_preset("nd-e", 0.8, 2.0, 10.0, 15.0, 6.0, 0.5),
    };
}

struct DelayedPreset {
    std::string name;
    ProxyGainSet gains;
    TheoremParams theorem;
};

struct DelayedGainValues {
    double sigma, mu, k0, p, d;
    double m_hat, k_hat, d_hat, p_hat, sigma_hat;
    double nu, zeta, gamma, psi, q;
};

inline DelayedPreset delayed_preset(std::string name, const DelayedGainValues& v, double d_bar)
{
    DelayedPreset out;
    out.name = std::move(name);
    GainSet& g = out.gains.robot;
    g.k0 = diag(2, v.k0);
    g.p = diag(2, v.p);
    g.d = diag(2, v.d);
    g.sigma = v.sigma;
    g.c = reference_c();
    out.gains.m_hat = diag(2, v.m_hat);
    out.gains.k_hat = diag(2, v.k_hat);
    out.gains.d_hat = diag(2, v.d_hat);
    out.gains.p_hat = diag(2, v.p_hat);
    out.gains.sigma_hat = v.sigma_hat;
    TheoremParams& tp = out.theorem;
    tp.mu = {v.mu, v.mu};
    tp.omega = {1.0, 1.0};
    tp.nu = v.nu;
    tp.zeta = {v.zeta, v.zeta};
    tp.gamma = v.gamma;
    tp.psi = v.psi;
    tp.d_bar = {d_bar, d_bar};
    tp.q = {diag(2, v.q), diag(2, v.q)};
    return out;
}

/// Certified delayed gain sets for d_bar = 0.5 s on both channels.
inline std::vector<DelayedPreset> delayed_presets(double d_bar = 0.5)
{
    return {
        delayed_preset("dl-a", {0.2, 1.0, 12.0, 2.0, 1.0, 1.0, 3.0, 3.0, 2.0, 0.1, 0.5, 0.5, 0.5, 1.0, 1.0},
                       d_bar),
        delayed_preset("dl-b", {0.2, 1.0, 10.0, 3.0, 1.5, 1.0, 6.0, 3.0, 3.0, 0.1, 0.5, 0.5, 0.5, 1.0, 1.0},
                       d_bar),
        delayed_preset("dl-c", {0.3, 1.5, 12.0, 2.0, 1.5, 1.0, 3.0, 3.5, 1.5, 0.1, 0.5, 0.5, 0.5, 1.0, 1.0},
                       d_bar),
    };
}

/// Stiff proxy coupling that approximates the undelayed loop when d_bar = 0.
inline DelayedPreset stiff_spring_preset()
{
    return delayed_preset("dl-stiff",
                          {1.0, 2.0, 12.0, 20.0, 8.0, 0.1, 10.0, 3.0, 50.0, 0.1, 0.5, 0.5, 0.5, 1.0, 1.0},
                          0.0);
}

/// Base scenario on the reference arm: master displaced by (0.5, 0), both at rest.
inline Scenario reference_scenario(std::string id)
{
    Scenario sc;
    sc.id = std::move(id);
    const auto arm = ManipulatorParams::two_link_reference();
    sc.plant = {arm, arm};
    sc.initial = {RobotState::zero(2), RobotState::zero(2)};
    sc.initial.master.q << 0.5, 0.0;
    sc.torque = {TorqueProfile::zero(), TorqueProfile::zero()};
    return sc;
}

inline Scenario nodelay_scenario(std::string id, const NodelayPreset& p)
{
    Scenario sc = reference_scenario(std::move(id));
    sc.mode = LoopMode::nodelay;
    sc.gains = p.gains;
    sc.theorem = p.theorem;
    return sc;
}

inline Scenario delayed_scenario(std::string id, const DelayedPreset& p,
                                 const SidePair<DelayProfile>& delay)
{
    Scenario sc = reference_scenario(std::move(id));
    sc.mode = LoopMode::delayed;
    sc.proxy_gains = p.gains;
    sc.theorem = p.theorem;
    sc.delay = delay;
    return sc;
}

/// Deterministic per-stream seed derived from a base seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream)
{
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline SidePair<DelayProfile> constant_delays(double d, double d_bar)
{
    return {DelayProfile::constant(d, d_bar), DelayProfile::constant(d, d_bar)};
}

inline SidePair<DelayProfile> sinusoidal_delays(double mean, double amp, double freq, double d_bar)
{
    auto m = DelayProfile::sinusoidal(mean, amp, freq, d_bar);
    auto s = m;
    s.phase = 1.0;
    return {m, s};
}

inline SidePair<DelayProfile> random_walk_delays(double d_bar, std::uint64_t seed)
{
    return {DelayProfile::random_walk(0.5 * d_bar, 0.02, 0.01, d_bar, derive_seed(seed, 0)),
            DelayProfile::random_walk(0.5 * d_bar, 0.02, 0.01, d_bar, derive_seed(seed, 1))};
}

} // namespace teleop::presets
