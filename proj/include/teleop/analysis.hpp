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

// Post-processing of simulation traces against a certificate: decay bound,
// invariant and attractive error balls, ISS estimate, mismatch bounds and the
// Lyapunov sandwich. Everything here is a pure function of the trace.

#include "teleop/certification.hpp"
#include "teleop/controllers.hpp"
#include "teleop/random.hpp"
#include "teleop/simulator.hpp"
#include "teleop/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace teleop {

struct AnalysisOptions {
    double eps_num = 1e-2;              ///< relative slack of the decay and ISS checks
    double invariant_inflation = 0.0;   ///< S_I radius^2 multiplier is 1 + this
    double attractive_inflation = 1e-2; ///< S_A radius^2 multiplier is 1 + this
    double attractive_floor = 1e-3;     ///< error radius [rad] accepted as "in S_A" when S_A is tiny
    double fit_horizon = 3.0;           ///< rate fit over [0, fit_horizon / kappa]
};

struct DecayCheck {
    bool pass = true;
    double slack = 0.0;
    double worst_excess = -std::numeric_limits<double>::infinity(); ///< max of V - bound - slack
    std::optional<double> first_violation;
    std::optional<double> fitted_rate;
};

struct SetCheck {
    double invariant_radius_sq = 0.0;
    double attractive_radius_sq = 0.0;
    double max_error_sq = 0.0;
    std::optional<double> first_touch; ///< first time inside the inflated S_A
    std::optional<double> entry_time;  ///< start of the final stretch inside, if it lasts to T
    bool invariant = true;
    bool entered = false;
    bool remains = false;
};

struct IssCheck {
    bool pass = true;
    double x0 = 0.0;
    double u_sup = 0.0;
    double worst_ratio = 0.0; ///< max of |x(t)| / estimate(t)
};

struct MismatchCheck {
    std::size_t evaluated = 0;
    std::size_t violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity(); ///< min of bound - s^T Delta
};

struct SandwichCheck {
    std::size_t lower_violations = 0;
    std::size_t upper_violations = 0;
    bool pass() const noexcept { return lower_violations == 0 && upper_violations == 0; }
};

/// All checks for one trace.
struct SetReport {
    std::string scenario_id;
    LoopMode mode = LoopMode::nodelay;
    bool certified = false;
    double kappa = 0.0;
    double V0 = 0.0;
    std::optional<Divergence> divergence;
    DecayCheck decay;
    SetCheck sets;
    IssCheck iss;
    MismatchCheck mismatch;
    SandwichCheck sandwich;
    double v2_min = 0.0;

    bool pass() const
    {
        return !divergence && decay.pass && sets.invariant && sets.entered && sets.remains &&
               iss.pass && mismatch.violations == 0 && sandwich.pass() && v2_min >= 0.0;
    }
};

namespace detail {

inline void require_trace(const SimulationTrace& trace)
{
    if (trace.samples.empty()) {
        throw InputError("analysis: empty trace");
    }
    if (trace.meta.certificate.kappa <= 0.0 || trace.meta.certificate.omega <= 0.0) {
        throw InputError("analysis: trace metadata lacks a certificate (kappa, omega)");
    }
}

} // namespace detail

/// State vector x of the ISS statement.
///   undelayed: [qd_m, qd_s, q_m - q_s]
///   delayed:   [qd_m, qd_s, qhatd_m, qhatd_s, q_m - qhat_m, q_s - qhat_s, qhat_m - qhat_s]
inline double state_norm(const TraceSample& smp, LoopMode mode)
{
    const auto& r = smp.robot;
    double sq = r.master.qdot.squaredNorm() + r.slave.qdot.squaredNorm();
    if (mode == LoopMode::nodelay) {
        return std::sqrt(sq + (r.master.q - r.slave.q).squaredNorm());
    }
    const auto& h = smp.proxy;
    sq += h.master.qdot.squaredNorm() + h.slave.qdot.squaredNorm();
    sq += (r.master.q - h.master.q).squaredNorm() + (r.slave.q - h.slave.q).squaredNorm();
    sq += (h.master.q - h.slave.q).squaredNorm();
    return std::sqrt(sq);
}

/// Least-squares slope of log(V - floor) over [0, horizon], negated.
/// Samples with V - floor below 1e3 machine epsilon are skipped.
inline std::optional<double> fit_decay_rate(const std::vector<TraceSample>& samples, double floor,
                                            double horizon)
{
    const double cutoff = 1e3 * std::numeric_limits<double>::epsilon();
    double n = 0.0, st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    for (const auto& smp : samples) {
        if (smp.t > horizon) {
            break;
        }
        const double y = smp.V - floor;
        if (!(y > cutoff)) {
            continue;
        }
        const double ly = std::log(y);
        n += 1.0;
        st += smp.t;
        sy += ly;
        stt += smp.t * smp.t;
        sty += smp.t * ly;
    }
    const double den = n * stt - st * st;
    if (n < 2.0 || den <= 0.0) {
        return std::nullopt;
    }
    return -(n * sty - st * sy) / den;
}

/// V(t) <= e^{-kappa t} V(0) + tau_bar^2 / (4 kappa omega) + eps (1 + V(0)), pointwise.
inline DecayCheck check_decay(const SimulationTrace& trace, const AnalysisOptions& opt = {})
{
    detail::require_trace(trace);
    const Certificate& cert = trace.meta.certificate;
    const double V0 = trace.V0();
    const double floor_term = cert.input_floor();

    DecayCheck out;
    out.slack = opt.eps_num * (1.0 + V0);
    for (const auto& smp : trace.samples) {
        const double bound = std::exp(-cert.kappa * smp.t) * V0 + floor_term;
        const double excess = smp.V - bound - out.slack;
        out.worst_excess = std::max(out.worst_excess, excess);
        if (excess > 0.0 && !out.first_violation) {
            out.first_violation = smp.t;
        }
    }
    if (trace.diverged()) {
        out.first_violation = out.first_violation.value_or(trace.divergence->t);
        out.worst_excess = std::numeric_limits<double>::infinity();
    }
    out.pass = !out.first_violation.has_value();

    // Steady floor: zero without input, otherwise the smallest V in the last tenth.
    double floor = 0.0;
    if (cert.tau_bar > 0.0) {
        const auto tail = trace.samples.size() - std::max<std::size_t>(1, trace.samples.size() / 10);
        floor = std::numeric_limits<double>::infinity();
        for (auto k = tail; k < trace.samples.size(); ++k) {
            floor = std::min(floor, trace.samples[k].V);
        }
        floor = std::max(floor, 0.0);
    }
    out.fitted_rate = fit_decay_rate(trace.samples, floor, opt.fit_horizon / cert.kappa);
    return out;
}

/// Invariance of S_I and attractivity of S_A for the error q_m - q_s.
inline SetCheck set_membership(const SimulationTrace& trace, const AnalysisOptions& opt = {})
{
    detail::require_trace(trace);
    const Certificate& cert = trace.meta.certificate;
    SetCheck out;
    out.invariant_radius_sq = cert.invariant_radius_sq(trace.V0());
    out.attractive_radius_sq = cert.attractive_radius_sq();
    const double inv_limit = out.invariant_radius_sq * (1.0 + opt.invariant_inflation);
    const double att_limit = std::max(out.attractive_radius_sq * (1.0 + opt.attractive_inflation),
                                      opt.attractive_floor * opt.attractive_floor);
    bool inside = false;
    for (const auto& smp : trace.samples) {
        const double e2 = smp.e_norm * smp.e_norm;
        out.max_error_sq = std::max(out.max_error_sq, e2);
        if (e2 > inv_limit) {
            out.invariant = false;
        }
        const bool now = e2 <= att_limit;
        if (now && !out.first_touch) {
            out.first_touch = smp.t;
        }
        if (now && !inside) {
            out.entry_time = smp.t;
        } else if (!now) {
            out.entry_time.reset();
        }
        inside = now;
    }
    out.entered = out.first_touch.has_value();
    out.remains = out.entry_time.has_value();
    if (trace.diverged()) {
        out.invariant = false;
        out.remains = false;
    }
    return out;
}

/// |x(t)| <= sqrt(a2/a1) |x(0)| e^{-kappa t/2} (1 + eps) + sup|u| / sqrt(2 a1 kappa omega).
/// The input supremum is taken over [0, t].
inline IssCheck iss_estimate_check(const SimulationTrace& trace, const AnalysisOptions& opt = {})
{
    detail::require_trace(trace);
    const Certificate& cert = trace.meta.certificate;
    IssCheck out;
    out.x0 = state_norm(trace.samples.front(), trace.meta.mode);
    double u_sup = 0.0;
    for (const auto& smp : trace.samples) {
        u_sup = std::max(u_sup, std::hypot(smp.tau_h.norm(), smp.tau_e.norm()));
        const double bound = cert.decay_gain() * out.x0 * std::exp(-0.5 * cert.kappa * smp.t) *
                                 (1.0 + opt.eps_num) +
                             cert.iss_gain() * u_sup;
        const double x = state_norm(smp, trace.meta.mode);
        if (x > 0.0) {
            const double ratio = bound > 0.0 ? x / bound : std::numeric_limits<double>::infinity();
            out.worst_ratio = std::max(out.worst_ratio, ratio);
        }
    }
    out.u_sup = u_sup;
    out.pass = out.worst_ratio <= 1.0 && !trace.diverged();
    return out;
}

/// s_i^T Delta_i against its quadratic bound at every sample, both sides.
inline MismatchCheck mismatch_check(const SimulationTrace& trace)
{
    detail::require_trace(trace);
    const auto& meta = trace.meta;
    MismatchCheck out;
    for (const auto& smp : trace.samples) {
        for (Side s : kSides) {
            const RobotState& me = smp.robot[s];
            const BoundConstants& b = meta.bounds[s];
            double lhs = 0.0;
            double rhs = 0.0;
            if (meta.mode == LoopMode::nodelay) {
                const RobotState& them = smp.robot[other(s)];
                const Vector sv = sliding_surface(me.qdot, me.q, them.q, meta.sigma);
                lhs = sv.dot(mismatch_nodelay(meta.plant[s], smp.robot.master, smp.robot.slave, s));
                rhs = mismatch_bound_nodelay(b, sv, me.qdot, smp.robot.master.qdot,
                                             smp.robot.slave.qdot, smp.robot.master.q - smp.robot.slave.q);
            } else {
                const RobotState& proxy = smp.proxy[s];
                const Vector sv = sliding_surface(me.qdot, me.q, proxy.q, meta.sigma);
                lhs = sv.dot(mismatch_delayed(meta.plant[s], me, proxy));
                rhs = mismatch_bound_delayed(b, sv, me, proxy);
            }
            const double margin = rhs - lhs;
            ++out.evaluated;
            out.worst_margin = std::min(out.worst_margin, margin);
            // Round-off allowance relative to the magnitude of both sides.
            if (margin < -1e-12 * (1.0 + std::abs(lhs) + std::abs(rhs))) {
                ++out.violations;
            }
        }
    }
    return out;
}

/// a1 |x(t)|^2 <= V(t) <= a2 (sup of |x| over [t - d_bar, t])^2 at every sample.
inline SandwichCheck sandwich_check(const SimulationTrace& trace)
{
    detail::require_trace(trace);
    const Certificate& cert = trace.meta.certificate;
    const double window = std::max(trace.meta.d_bar.master, trace.meta.d_bar.slave);
    const auto& samples = trace.samples;
    std::vector<double> x(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        x[k] = state_norm(samples[k], trace.meta.mode);
    }
    SandwichCheck out;
    // Initial history is constant, so the window supremum includes |x(0)|.
    std::size_t lo = 0;
    std::deque<std::size_t> maxq;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        while (!maxq.empty() && x[maxq.back()] <= x[k]) {
            maxq.pop_back();
        }
        maxq.push_back(k);
        while (samples[lo].t < samples[k].t - window - 1e-12) {
            ++lo;
        }
        while (maxq.front() < lo) {
            maxq.pop_front();
        }
        double sup = x[maxq.front()];
        if (samples[k].t - window < samples.front().t) {
            sup = std::max(sup, x.front());
        }
        const double V = samples[k].V;
        const double tol = 1e-12 * (1.0 + std::abs(V));
        if (cert.a1 * x[k] * x[k] > V + tol) {
            ++out.lower_violations;
        }
        if (V > cert.a2 * sup * sup + tol) {
            ++out.upper_violations;
        }
    }
    return out;
}

inline SetReport analyze(const SimulationTrace& trace, const AnalysisOptions& opt = {})
{
    detail::require_trace(trace);
    SetReport r;
    r.scenario_id = trace.meta.scenario_id;
    r.mode = trace.meta.mode;
    r.certified = trace.meta.certificate.pass;
    r.kappa = trace.meta.certificate.kappa;
    r.V0 = trace.V0();
    r.divergence = trace.divergence;
    r.decay = check_decay(trace, opt);
    r.sets = set_membership(trace, opt);
    r.iss = iss_estimate_check(trace, opt);
    r.mismatch = mismatch_check(trace);
    r.sandwich = sandwich_check(trace);
    r.v2_min = 0.0;
    for (const auto& smp : trace.samples) {
        r.v2_min = std::min(r.v2_min, smp.V2);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Integral inequality probe

struct LemmaProbeResult {
    std::size_t instances = 0;
    std::size_t violations = 0;
    double worst_margin = std::numeric_limits<double>::infinity(); ///< min of rhs - lhs
};

/// Smallest of rhs - lhs over both signs of
///   +-2 a^T int b - int b^T Upsilon b <= d a^T Upsilon^{-1} a,
/// with both integrals over [t - d, t] on a trapezoid grid of `points` nodes.
template <class B>
double lemma_L1_margin(const Matrix& ups, const Vector& a, B&& b_at, double t, double d,
                       std::size_t points = 1000)
{
    detail::require(points >= 2, "lemma_L1_probe: need at least two quadrature points");
    Vector int_b = Vector::Zero(a.size());
    double int_bqb = 0.0;
    const double h = d / static_cast<double>(points - 1);
    for (std::size_t j = 0; j < points; ++j) {
        const double w = (j == 0 || j + 1 == points) ? 0.5 * h : h;
        const Vector b = b_at(t - d + static_cast<double>(j) * h);
        int_b += w * b;
        int_bqb += w * b.dot(ups * b);
    }
    const double rhs = d * a.dot(ups.llt().solve(a));
    const double cross = 2.0 * std::abs(a.dot(int_b));
    return rhs - (cross - int_bqb);
}

/// Runs lemma_L1_margin on random SPD Upsilon, vectors a, sums of sinusoids b
/// and delays d <= d_bar, d_bar uniform in [0, 1].
inline LemmaProbeResult lemma_L1_probe(std::size_t instances, std::uint64_t seed,
                                       Eigen::Index dim = 2, std::size_t points = 1000)
{
    Rng rng(seed);
    LemmaProbeResult out;
    for (std::size_t k = 0; k < instances; ++k) {
        const Matrix G = Matrix::NullaryExpr(dim, dim, [&] { return rng.normal(); });
        const Matrix ups = G * G.transpose() + 0.05 * Matrix::Identity(dim, dim);
        const Vector a = rng.normal_vector(dim) * rng.uniform(0.0, 3.0);
        const double d_bar = rng.uniform();
        const double d = d_bar * rng.uniform();
        const double t = rng.uniform(0.0, 10.0);

        const Matrix amp = Matrix::NullaryExpr(dim, 3, [&] { return rng.normal(); });
        const Matrix freq = Matrix::NullaryExpr(dim, 3, [&] { return rng.uniform(0.0, 20.0); });
        const Matrix phase = Matrix::NullaryExpr(dim, 3, [&] { return rng.uniform(0.0, 6.3); });
        auto b_at = [&](double xi) {
            Vector b(dim);
            for (Eigen::Index r = 0; r < dim; ++r) {
                b(r) = (amp.row(r).array() * (freq.row(r).array() * xi + phase.row(r).array()).sin()).sum();
            }
            return b;
        };

        const double margin = lemma_L1_margin(ups, a, b_at, t, d, points);
        out.worst_margin = std::min(out.worst_margin, margin);
        if (margin < -1e-10) {
            ++out.violations;
        }
        ++out.instances;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rendering

inline nlohmann::json to_json(const SetReport& r)
{
    auto opt = [](const std::optional<double>& v) -> nlohmann::json {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    nlohmann::json j;
    j["scenario"] = r.scenario_id;
    j["mode"] = to_string(r.mode);
    j["certified"] = r.certified;
    j["verdict"] = r.pass() ? "pass" : "fail";
    j["kappa"] = r.kappa;
    j["V0"] = r.V0;
    j["divergence_time"] = r.divergence ? nlohmann::json(r.divergence->t) : nlohmann::json(nullptr);
    j["decay"] = {{"pass", r.decay.pass},
                  {"slack", r.decay.slack},
                  {"worst_excess", std::isfinite(r.decay.worst_excess) ? nlohmann::json(r.decay.worst_excess)
                                                                       : nlohmann::json(nullptr)},
                  {"first_violation", opt(r.decay.first_violation)},
                  {"fitted_rate", opt(r.decay.fitted_rate)}};
    j["sets"] = {{"invariant_radius_sq", r.sets.invariant_radius_sq},
                 {"attractive_radius_sq", r.sets.attractive_radius_sq},
                 {"max_error_sq", r.sets.max_error_sq},
                 {"first_touch", opt(r.sets.first_touch)},
                 {"entry_time", opt(r.sets.entry_time)},
                 {"invariant", r.sets.invariant},
                 {"entered", r.sets.entered},
                 {"remains", r.sets.remains}};
    j["iss"] = {{"pass", r.iss.pass}, {"x0", r.iss.x0}, {"u_sup", r.iss.u_sup},
                {"worst_ratio", r.iss.worst_ratio}};
    j["mismatch"] = {{"evaluated", r.mismatch.evaluated},
                     {"violations", r.mismatch.violations},
                     {"worst_margin", std::isfinite(r.mismatch.worst_margin)
                                          ? nlohmann::json(r.mismatch.worst_margin)
                                          : nlohmann::json(nullptr)}};
    j["sandwich"] = {{"lower_violations", r.sandwich.lower_violations},
                     {"upper_violations", r.sandwich.upper_violations}};
    j["v2_min"] = r.v2_min;
    return j;
}

inline std::string render_report(const SetReport& r)
{
    std::ostringstream os;
    os.precision(6);
    auto flag = [](bool ok) { return ok ? "[ ok ] " : "[FAIL] "; };
    os << "analysis of '" << r.scenario_id << "' (" << to_string(r.mode) << "): "
       << (r.pass() ? "PASS" : "FAIL") << "\n";
    if (r.divergence) {
        os << "  diverged at t = " << r.divergence->t << " (|x| = " << r.divergence->state_norm << ")\n";
    }
    os << "  " << flag(r.decay.pass) << "decay bound, slack " << r.decay.slack << ", worst excess "
       << r.decay.worst_excess;
    if (r.decay.first_violation) {
        os << ", first violation t = " << *r.decay.first_violation;
    }
    os << "\n  fitted rate ";
    if (r.decay.fitted_rate) {
        os << *r.decay.fitted_rate;
    } else {
        os << "n/a";
    }
    os << " (kappa " << r.kappa << ")\n";
    os << "  " << flag(r.sets.invariant) << "S_I radius^2 " << r.sets.invariant_radius_sq
       << ", max error^2 " << r.sets.max_error_sq << "\n";
    os << "  " << flag(r.sets.entered && r.sets.remains) << "S_A radius^2 "
       << r.sets.attractive_radius_sq << ", entry ";
    if (r.sets.entry_time) {
        os << "t = " << *r.sets.entry_time;
    } else if (r.sets.first_touch) {
        os << "t = " << *r.sets.first_touch << " (left again)";
    } else {
        os << "not reached";
    }
    os << "\n  " << flag(r.iss.pass) << "ISS estimate, worst ratio " << r.iss.worst_ratio << "\n";
    os << "  " << flag(r.mismatch.violations == 0) << "mismatch bound, " << r.mismatch.violations
       << " of " << r.mismatch.evaluated << " samples violate\n";
    os << "  " << flag(r.sandwich.pass()) << "Lyapunov sandwich, " << r.sandwich.lower_violations
       << " lower / " << r.sandwich.upper_violations << " upper violations\n";
    return os.str();
}

} // namespace teleop
