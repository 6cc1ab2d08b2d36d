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

// Fixed-step RK4 simulation of the closed teleoperation loop.
//
// State layout (n = dof):
//   undelayed: [q_m, qd_m, q_s, qd_s]                                   (4n)
//   delayed:   [q_m, qd_m, q_s, qd_s, qh_m, qhd_m, qh_s, qhd_s]          (8n)
//
// In the delayed loop each proxy reads the remote proxy position through a
// SignalHistory at every RK4 stage time. When the retrieval time falls inside
// the current step, the value is interpolated between the last stored sample
// and the remote proxy's own stage value.

#include "teleop/certification.hpp"
#include "teleop/controllers.hpp"
#include "teleop/delay_channel.hpp"
#include "teleop/dynamics.hpp"
#include "teleop/lyapunov.hpp"
#include "teleop/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace teleop {

enum class TorqueKind { zero, step, sinusoid, pulse_train };

inline std::string to_string(TorqueKind k)
{
    switch (k) {
    case TorqueKind::zero: return "zero";
    case TorqueKind::step: return "step";
    case TorqueKind::sinusoid: return "sinusoid";
    case TorqueKind::pulse_train: return "pulse-train";
    }
    return "unknown";
}

inline TorqueKind torque_kind_from_string(const std::string& s)
{
    if (s == "zero") return TorqueKind::zero;
    if (s == "step") return TorqueKind::step;
    if (s == "sinusoid") return TorqueKind::sinusoid;
    if (s == "pulse-train") return TorqueKind::pulse_train;
    throw InputError("unknown torque kind '" + s + "'");
}

/// Scripted human or environment torque, bounded by |amplitude|.
struct TorqueProfile {
    TorqueKind kind = TorqueKind::zero;
    Vector amplitude;
    double onset = 0.0;     ///< step onset / first pulse [s]
    double frequency = 0.0; ///< sinusoid [Hz]
    double phase = 0.0;     ///< sinusoid [rad]
    double period = 1.0;    ///< pulse train [s]
    double width = 0.5;     ///< pulse train [s]

    /// Declared bound on |tau(t)|.
    double tau_bar() const
    {
        return kind == TorqueKind::zero || amplitude.size() == 0 ? 0.0 : amplitude.norm();
    }

    void validate(Eigen::Index dof) const
    {
        if (kind == TorqueKind::zero) {
            detail::require(amplitude.size() == 0 || amplitude.size() == dof,
                            "TorqueProfile.amplitude: wrong dimension");
            return;
        }
        detail::require_dim(amplitude.size(), dof, "TorqueProfile.amplitude");
        detail::require(amplitude.allFinite(), "TorqueProfile.amplitude must be finite");
        if (kind == TorqueKind::pulse_train) {
            detail::require(period > 0.0 && width >= 0.0 && width <= period,
                            "TorqueProfile: need 0 <= width <= period");
        }
    }

    static TorqueProfile zero() { return {}; }

    static TorqueProfile step(Vector amplitude, double onset)
    {
        TorqueProfile p;
        p.kind = TorqueKind::step;
        p.amplitude = std::move(amplitude);
        p.onset = onset;
        return p;
    }

    static TorqueProfile sinusoid(Vector amplitude, double frequency, double phase = 0.0)
    {
        TorqueProfile p;
        p.kind = TorqueKind::sinusoid;
        p.amplitude = std::move(amplitude);
        p.frequency = frequency;
        p.phase = phase;
        return p;
    }

    static TorqueProfile pulse_train(Vector amplitude, double onset, double period, double width)
    {
        TorqueProfile p;
        p.kind = TorqueKind::pulse_train;
        p.amplitude = std::move(amplitude);
        p.onset = onset;
        p.period = period;
        p.width = width;
        return p;
    }
};

inline Vector external_torque(const TorqueProfile& p, double t, Eigen::Index dof)
{
    switch (p.kind) {
    case TorqueKind::zero:
        return Vector::Zero(dof);
    case TorqueKind::step:
        return t >= p.onset ? p.amplitude : Vector::Zero(dof);
    case TorqueKind::sinusoid:
        return p.amplitude * std::sin(2.0 * std::numbers::pi * p.frequency * t + p.phase);
    case TorqueKind::pulse_train: {
        if (t < p.onset) {
            return Vector::Zero(dof);
        }
        const double phase = std::fmod(t - p.onset, p.period);
        return phase < p.width ? p.amplitude : Vector::Zero(dof);
    }
    }
    return Vector::Zero(dof);
}

enum class LoopMode { nodelay, delayed };

inline std::string to_string(LoopMode m) { return m == LoopMode::nodelay ? "nodelay" : "delayed"; }

struct Scenario {
    std::string id = "scenario";
    LoopMode mode = LoopMode::nodelay;
    SidePair<ManipulatorParams> plant;
    GainSet gains;            ///< undelayed loop
    ProxyGainSet proxy_gains; ///< delayed loop
    TheoremParams theorem;
    SidePair<TorqueProfile> torque; ///< master: operator, slave: environment
    SidePair<DelayProfile> delay;   ///< delay[i] acts on data sent by side i
    SidePair<RobotState> initial;
    std::optional<SidePair<RobotState>> initial_proxy; ///< defaults to `initial`
    double step = 1e-3;
    double duration = 10.0;
    double blowup = 1e6;
    double bound_safety = kDefaultBoundSafety;
    std::optional<SidePair<BoundConstants>> bounds; ///< estimated from the plant when empty
    std::uint64_t seed = 0;

    Eigen::Index dof() const { return plant.master.dof(); }

    /// tau_bar = sqrt(tau_bar_h^2 + tau_bar_e^2).
    double tau_bar() const { return std::hypot(torque.master.tau_bar(), torque.slave.tau_bar()); }

    SidePair<RobotState> proxy_initial() const { return initial_proxy.value_or(initial); }

    void validate() const
    {
        const auto n = dof();
        for (Side s : kSides) {
            plant[s].validate();
            detail::require(plant[s].dof() == n, "Scenario: master and slave dof differ");
            initial[s].validate(n);
            torque[s].validate(n);
        }
        detail::require(step > 0.0 && std::isfinite(step), "Scenario.step must be positive");
        detail::require(duration > step, "Scenario.duration must exceed the step");
        detail::require(blowup > 0.0, "Scenario.blowup must be positive");
        if (mode == LoopMode::nodelay) {
            gains.validate(n);
        } else {
            proxy_gains.validate(n);
            for (Side s : kSides) {
                delay[s].validate();
                detail::require(delay[s].d_bar <= theorem.d_bar[s] + 1e-12,
                                "Scenario: delay profile bound exceeds theorem d_bar");
                if (initial_proxy) {
                    (*initial_proxy)[s].validate(n);
                }
            }
        }
    }
};

/// Bound constants for both plants, estimated unless the scenario pins them.
inline SidePair<BoundConstants> scenario_bounds(const Scenario& sc)
{
    if (sc.bounds) {
        return *sc.bounds;
    }
    return {estimate_bounds(sc.plant.master, sc.bound_safety),
            estimate_bounds(sc.plant.slave, sc.bound_safety)};
}

inline Certificate certify(const Scenario& sc, const SidePair<BoundConstants>& bounds)
{
    return sc.mode == LoopMode::nodelay
               ? certify_nodelay(sc.gains, bounds, sc.theorem, sc.tau_bar())
               : certify_delayed(sc.proxy_gains, bounds, sc.theorem, sc.tau_bar());
}

struct TraceSample {
    double t = 0.0;
    SidePair<RobotState> robot;
    SidePair<RobotState> proxy; ///< delayed loop only
    SidePair<Vector> tau;       ///< control torques
    Vector tau_h;
    Vector tau_e;
    SidePair<double> delay{0.0, 0.0};
    double V = 0.0;
    double V1 = 0.0;
    double V2 = 0.0;
    double e_norm = 0.0;
};

struct Divergence {
    double t = 0.0;
    double state_norm = 0.0;
};

struct TraceMetadata {
    std::string scenario_id;
    LoopMode mode = LoopMode::nodelay;
    Eigen::Index dof = 0;
    double step = 0.0;
    double duration = 0.0;
    double tau_bar = 0.0;
    std::uint64_t seed = 0;
    SidePair<std::uint64_t> delay_seeds{0, 0};
    SidePair<std::string> delay_kinds{"none", "none"};
    Certificate certificate;
    SidePair<BoundConstants> bounds;
    SidePair<ManipulatorParams> plant;
    double sigma = 0.0; ///< robot sliding-surface slope
    SidePair<double> d_bar{0.0, 0.0};
};

struct SimulationTrace {
    TraceMetadata meta;
    std::vector<TraceSample> samples;
    std::optional<Divergence> divergence;

    bool diverged() const noexcept { return divergence.has_value(); }
    bool empty() const noexcept { return samples.empty(); }
    double V0() const { return samples.empty() ? 0.0 : samples.front().V; }
};

/// One classical RK4 step of x' = f(t, x).
template <class F>
Vector rk4_step(F&& f, double t, const Vector& x, double h)
{
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
    const Vector k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
    const Vector k4 = f(t + h, x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace detail {

struct Layout {
    Eigen::Index n;
    Eigen::Index q(Side s) const { return s == Side::master ? 0 : 2 * n; }
    Eigen::Index qd(Side s) const { return q(s) + n; }
    Eigen::Index qh(Side s) const { return 4 * n + (s == Side::master ? 0 : 2 * n); }
    Eigen::Index qhd(Side s) const { return qh(s) + n; }

    RobotState robot(const Vector& x, Side s) const
    {
        return {x.segment(q(s), n), x.segment(qd(s), n)};
    }
    RobotState proxy(const Vector& x, Side s) const
    {
        return {x.segment(qh(s), n), x.segment(qhd(s), n)};
    }
    Vector proxy_stack(const Vector& x, Side s) const { return x.segment(qh(s), 2 * n); }
};

} // namespace detail

/// Integrates the scenario. Failing certificates are accepted so that
/// negative controls can be simulated; the certificate is only recorded.
/// A state norm above `sc.blowup` stops the run and sets `divergence`.
inline SimulationTrace run(const Scenario& sc, const Certificate& cert,
                           const SidePair<BoundConstants>& bounds)
{
    sc.validate();
    const auto n = sc.dof();
    const detail::Layout L{n};
    const bool delayed = sc.mode == LoopMode::delayed;
    const double h = sc.step;
    const auto steps = static_cast<long>(std::llround(sc.duration / h));

    SimulationTrace trace;
    trace.meta.scenario_id = sc.id;
    trace.meta.mode = sc.mode;
    trace.meta.dof = n;
    trace.meta.step = h;
    trace.meta.duration = static_cast<double>(steps) * h;
    trace.meta.tau_bar = sc.tau_bar();
    trace.meta.seed = sc.seed;
    trace.meta.certificate = cert;
    trace.meta.bounds = bounds;
    trace.meta.plant = sc.plant;
    trace.meta.sigma = delayed ? sc.proxy_gains.robot.sigma : sc.gains.sigma;
    if (delayed) {
        trace.meta.d_bar = sc.theorem.d_bar;
    }
    trace.samples.reserve(static_cast<std::size_t>(steps) + 1);

    Vector x(delayed ? 8 * n : 4 * n);
    for (Side s : kSides) {
        x.segment(L.q(s), n) = sc.initial[s].q;
        x.segment(L.qd(s), n) = sc.initial[s].qdot;
    }

    // Delayed-loop machinery. Histories hold [qhat; qhatdot] per side.
    std::optional<SidePair<DelayProcess>> delays;
    std::vector<SignalHistory> histories;
    KrasovskiiParams kp;
    if (delayed) {
        const auto proxy0 = sc.proxy_initial();
        for (Side s : kSides) {
            x.segment(L.qh(s), n) = proxy0[s].q;
            x.segment(L.qhd(s), n) = proxy0[s].qdot;
            trace.meta.delay_seeds[s] = sc.delay[s].seed;
            trace.meta.delay_kinds[s] = to_string(sc.delay[s].kind);
        }
        delays.emplace(SidePair<DelayProcess>{DelayProcess(sc.delay.master, sc.duration + h),
                                              DelayProcess(sc.delay.slave, sc.duration + h)});
        for (Side s : kSides) {
            const double retain = std::max(sc.theorem.d_bar[s], sc.delay[s].d_bar);
            histories.push_back(SignalHistory::constant(retain, h, L.proxy_stack(x, s)));
        }
        kp.gamma = sc.theorem.gamma;
        kp.d_bar = sc.theorem.d_bar;
        kp.q = sc.theorem.q;
        kp.step = h;
    }
    auto history = [&](Side s) -> SignalHistory& {
        return histories[s == Side::master ? 0 : 1];
    };

    // Remote proxy position qhat_j(t - d_j(t)) seen at stage time t.
    auto delayed_remote = [&](Side j, double t, const Vector& stage) -> Vector {
        const double tq = t - (*delays)[j].at(t);
        const SignalHistory& hist = history(j);
        if (tq <= hist.last_time()) {
            return hist.sample(tq).head(n);
        }
        const double t0 = hist.last_time();
        const double w = t > t0 ? (tq - t0) / (t - t0) : 1.0;
        return (1.0 - w) * hist.last_value().head(n) + w * stage.segment(L.qh(j), n);
    };

    struct Torques {
        SidePair<Vector> control;
        Vector tau_h;
        Vector tau_e;
    };
    auto torques_at = [&](double t, const Vector& xs) {
        Torques out;
        out.tau_h = external_torque(sc.torque.master, t, n);
        out.tau_e = external_torque(sc.torque.slave, t, n);
        for (Side s : kSides) {
            const RobotState r = L.robot(xs, s);
            out.control[s] = delayed
                                 ? control_delayed(sc.proxy_gains.robot, r, xs.segment(L.qh(s), n))
                                 : control_nodelay(sc.gains, r, xs.segment(L.q(other(s)), n));
        }
        return out;
    };

    auto rhs = [&](double t, const Vector& xs) -> Vector {
        Vector dx(xs.size());
        const Torques tq = torques_at(t, xs);
        for (Side s : kSides) {
            const RobotState r = L.robot(xs, s);
            const Vector& ext = s == Side::master ? tq.tau_h : tq.tau_e;
            dx.segment(L.q(s), n) = r.qdot;
            dx.segment(L.qd(s), n) = forward_dynamics(sc.plant[s], r, tq.control[s] + ext);
        }
        if (delayed) {
            for (Side s : kSides) {
                const RobotState ph = L.proxy(xs, s);
                const Vector remote = delayed_remote(other(s), t, xs);
                dx.segment(L.qh(s), n) = ph.qdot;
                dx.segment(L.qhd(s), n) =
                    proxy_accel(sc.proxy_gains, ph, xs.segment(L.q(s), n), remote);
            }
        }
        return dx;
    };

    auto record = [&](double t, const Vector& xs) {
        TraceSample smp;
        smp.t = t;
        const Torques tq = torques_at(t, xs);
        for (Side s : kSides) {
            smp.robot[s] = L.robot(xs, s);
            smp.tau[s] = tq.control[s];
        }
        smp.tau_h = tq.tau_h;
        smp.tau_e = tq.tau_e;
        if (delayed) {
            SidePair<RobotState> proxies;
            for (Side s : kSides) {
                proxies[s] = L.proxy(xs, s);
                smp.delay[s] = (*delays)[s].at(t);
            }
            smp.proxy = proxies;
            const LyapunovSample ls =
                lyapunov_delayed(sc.plant, sc.proxy_gains, smp.robot, proxies,
                                 {&history(Side::master), &history(Side::slave)}, t, kp);
            smp.V = ls.V;
            smp.V1 = ls.V1;
            smp.V2 = ls.V2;
            smp.e_norm = ls.e_norm;
        } else {
            const LyapunovSample ls =
                lyapunov_nodelay(sc.plant, sc.gains, smp.robot.master, smp.robot.slave);
            smp.V = ls.V;
            smp.V1 = ls.V1;
            smp.e_norm = ls.e_norm;
        }
        trace.samples.push_back(std::move(smp));
    };

    auto push_histories = [&](double t, const Vector& xs) {
        for (Side s : kSides) {
            history(s).push(t, L.proxy_stack(xs, s));
        }
    };

    if (delayed) {
        push_histories(0.0, x);
    }
    record(0.0, x);
    for (long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * h;
        const double t_next = static_cast<double>(k + 1) * h;
        Vector x_next = rk4_step(rhs, t, x, h);
        const double norm = x_next.norm();
        if (!std::isfinite(norm) || norm > sc.blowup) {
            trace.divergence = Divergence{t_next, norm};
            break;
        }
        x = std::move(x_next);
        if (delayed) {
            push_histories(t_next, x);
        }
        record(t_next, x);
    }
    return trace;
}

/// Estimates bounds, certifies and runs.
inline SimulationTrace run(const Scenario& sc)
{
    const auto bounds = scenario_bounds(sc);
    return run(sc, certify(sc, bounds), bounds);
}

} // namespace teleop
