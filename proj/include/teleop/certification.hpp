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

// Gain certification for ISS teleoperation.
//
// Every gain matrix is diagonal, so all conditions except the proxy spring
// matrix P~ (3n x 3n) reduce to entrywise comparisons. Margins are reported in
// absolute eigenvalue units. A condition written `>= 0` passes when its margin
// is >= 0, a strict one (`> 0`) when its margin is > 0. No tolerance is applied;
// conservatism belongs in the BoundConstants safety factor.

#include "teleop/controllers.hpp"
#include "teleop/dynamics.hpp"
#include "teleop/types.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace teleop {

/// Free parameters of the stability conditions. The delayed-loop fields are
/// ignored by certify_nodelay.
struct TheoremParams {
    SidePair<double> mu{2.0, 2.0};
    SidePair<double> omega{1.0, 1.0};
    double kappa = 0.5; ///< requested decay rate (undelayed loop)

    double nu = 0.5;
    SidePair<double> zeta{0.5, 0.5};
    double gamma = 0.5;
    double psi = 1.0;
    SidePair<double> d_bar{0.0, 0.0}; ///< d_bar[i]: delay bound of data sent by side i
    SidePair<Diagonal> q;              ///< weights of the Krasovskii term

    void validate_nodelay() const
    {
        for (Side s : kSides) {
            detail::require(mu[s] > 0.0, "TheoremParams.mu must be positive");
            detail::require(omega[s] > 0.0, "TheoremParams.omega must be positive");
        }
        detail::require(kappa > 0.0 && std::isfinite(kappa), "TheoremParams.kappa must be positive");
    }

    void validate_delayed(Eigen::Index dof) const
    {
        for (Side s : kSides) {
            detail::require(mu[s] > 0.0, "TheoremParams.mu must be positive");
            detail::require(omega[s] > 0.0, "TheoremParams.omega must be positive");
            detail::require(zeta[s] > 0.0, "TheoremParams.zeta must be positive");
            detail::require(d_bar[s] >= 0.0 && std::isfinite(d_bar[s]),
                            "TheoremParams.d_bar must be >= 0");
            detail::require_dim(q[s].size(), dof, "TheoremParams.Q");
            detail::require(detail::all_positive(q[s]), "TheoremParams.Q must be positive definite");
        }
        detail::require(nu > 0.0, "TheoremParams.nu must be positive");
        detail::require(gamma > 0.0, "TheoremParams.gamma must be positive");
        detail::require(psi > 0.0, "TheoremParams.psi must be positive");
    }
};

/// One named inequality with its margin.
struct Condition {
    std::string name;
    std::string scope; ///< "master", "slave" or "shared"
    double margin = 0.0;
    bool strict = false;

    bool satisfied() const noexcept { return strict ? margin > 0.0 : margin >= 0.0; }
};

enum class CertMode { nodelay, delayed };

inline std::string to_string(CertMode m)
{
    return m == CertMode::nodelay ? "nodelay" : "delayed";
}

struct Certificate {
    CertMode mode = CertMode::nodelay;
    bool pass = false;
    std::vector<Condition> conditions;

    double kappa = 0.0;
    double omega = 0.0;
    double delta = std::numeric_limits<double>::quiet_NaN(); ///< delayed loop only
    double a1 = 0.0; ///< V >= a1 |x|^2
    double a2 = 0.0; ///< V <= a2 |x|^2 (window supremum in the delayed loop)
    double p_min = 0.0;
    double p_max = 0.0;
    double phat_min = std::numeric_limits<double>::quiet_NaN();
    double phat_max = std::numeric_limits<double>::quiet_NaN();
    double p_prime = std::numeric_limits<double>::quiet_NaN();
    double tau_bar = 0.0;

    std::vector<Condition> violations() const
    {
        std::vector<Condition> out;
        std::copy_if(conditions.begin(), conditions.end(), std::back_inserter(out),
                     [](const Condition& c) { return !c.satisfied(); });
        return out;
    }

    const Condition* find(std::string_view name, std::string_view scope = {}) const
    {
        for (const auto& c : conditions) {
            if (c.name == name && (scope.empty() || c.scope == scope)) {
                return &c;
            }
        }
        return nullptr;
    }

    /// Steady input term tau_bar^2 / (4 kappa omega) of the decay bound.
    double input_floor() const { return tau_bar * tau_bar / (4.0 * kappa * omega); }

    /// Squared radius of the invariant error ball for initial value V0.
    double invariant_radius_sq(double V0) const
    {
        const double scale = mode == CertMode::nodelay ? 2.0 / p_min : 4.0 / p_prime;
        return scale * (V0 + input_floor());
    }

    /// Squared radius of the globally attractive error ball.
    double attractive_radius_sq() const
    {
        const double denom = mode == CertMode::nodelay ? 2.0 * p_min : p_prime;
        return tau_bar * tau_bar / (denom * kappa * omega);
    }

    /// Gain of the state estimate: |x(t)| <= sqrt(a2/a1) r e^{-kappa t/2} + iss_gain * sup|u|.
    double iss_gain() const { return 1.0 / std::sqrt(2.0 * a1 * kappa * omega); }
    double decay_gain() const { return std::sqrt(a2 / a1); }
};

// ---------------------------------------------------------------------------
// Proxy spring matrix and its Schur test

/// Blocks of the symmetric 3x3 block matrix P~; B12 = B21 = 0.
struct PTildeBlocks {
    Matrix b11, b22, b33, b13, b23;

    Matrix assemble() const
    {
        const auto n = b11.rows();
        Matrix P = Matrix::Zero(3 * n, 3 * n);
        P.block(0, 0, n, n) = b11;
        P.block(n, n, n, n) = b22;
        P.block(2 * n, 2 * n, n, n) = b33;
        P.block(0, 2 * n, n, n) = b13;
        P.block(2 * n, 0, n, n) = b13.transpose();
        P.block(n, 2 * n, n, n) = b23;
        P.block(2 * n, n, n, n) = b23.transpose();
        return P;
    }
};

struct SchurResult {
    bool pass = false;
    double margin = 0.0; ///< smallest eigenvalue encountered
};

inline double min_eigenvalue(const Matrix& S)
{
    const Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw NumericalError("min_eigenvalue: eigen decomposition failed");
    }
    return es.eigenvalues().minCoeff();
}

/// P~ > 0 iff B33 > 0 and diag(B11, B22) - [B13; B23] B33^{-1} [B13^T B23^T] > 0.
inline SchurResult schur_positive(const PTildeBlocks& blocks)
{
    const auto n = blocks.b11.rows();
    for (const Matrix* b : {&blocks.b11, &blocks.b22, &blocks.b33, &blocks.b13, &blocks.b23}) {
        detail::require(b->rows() == n && b->cols() == n, "schur_positive: blocks must be n x n");
    }
    const double pivot = min_eigenvalue(blocks.b33);
    if (!(pivot > 0.0)) {
        return {false, std::min(pivot, 0.0)};
    }
    Matrix upper = Matrix::Zero(2 * n, 2 * n);
    upper.topLeftCorner(n, n) = blocks.b11;
    upper.bottomRightCorner(n, n) = blocks.b22;
    Matrix coupling(2 * n, n);
    coupling << blocks.b13, blocks.b23;
    const Matrix complement = upper - coupling * blocks.b33.ldlt().solve(coupling.transpose());
    const double m = min_eigenvalue(0.5 * (complement + complement.transpose()));
    return {m > 0.0, std::min(pivot, m)};
}

namespace detail {

inline double min_entry(const Diagonal& d) { return d.minCoeff(); }

inline void add(std::vector<Condition>& out, std::string name, std::string scope, double margin,
                bool strict = false)
{
    out.push_back({std::move(name), std::move(scope), margin, strict});
}

inline std::string scope_of(Side s) { return std::string(to_string(s)); }

} // namespace detail

/// Proxy-side spring terms of the delayed loop, sum_i [x_i^T Pbar_i x_i +
/// sigma_hat ehat_i^T (I - nu/4 D_hat) ehat_i], written as q~^T P~ q~ with
/// q~ = [q_m - qhat_m; q_s - qhat_s; qhat_m - qhat_s].
inline PTildeBlocks proxy_spring_blocks(const ProxyGainSet& pg, const SidePair<Diagonal>& p_bar,
                                        double nu)
{
    const Diagonal A = 1.0 - 0.25 * nu * pg.d_hat.array();
    const Diagonal& P = pg.p_robot();
    const Diagonal& Ph = pg.p_hat;
    const double sh = pg.sigma_hat;
    PTildeBlocks b;
    b.b11 = (sh * P.cwiseProduct(A).cwiseProduct(P) + p_bar.master).asDiagonal();
    b.b22 = (sh * P.cwiseProduct(A).cwiseProduct(P) + p_bar.slave).asDiagonal();
    b.b13 = (sh * P.cwiseProduct(A).cwiseProduct(Ph)).asDiagonal();
    b.b23 = b.b13;
    b.b33 = (sh * Ph.cwiseProduct(2.0 * A).cwiseProduct(Ph)).asDiagonal();
    return b;
}

/// Largest delta with P~ >= (delta/2) (I_3 (x) W), W = entrywise max(P, P_hat),
/// backed off by a relative 1e-10 so the inequality verifies in floating point.
inline double extract_delta(const Matrix& p_tilde, const Diagonal& w)
{
    const auto n = w.size();
    Vector scale(3 * n);
    scale << w, w, w;
    const Vector inv_sqrt = scale.cwiseSqrt().cwiseInverse();
    const Matrix scaled = inv_sqrt.asDiagonal() * p_tilde * inv_sqrt.asDiagonal();
    const double lam = min_eigenvalue(0.5 * (scaled + scaled.transpose()));
    return 2.0 * lam * (lam > 0.0 ? 1.0 - 1e-10 : 1.0 + 1e-10);
}

/// Margin of P~ - (delta/2) (I_3 (x) W).
inline double delta_margin(const Matrix& p_tilde, const Diagonal& w, double delta)
{
    const auto n = w.size();
    Vector scale(3 * n);
    scale << w, w, w;
    const Matrix S = p_tilde - 0.5 * delta * Matrix(scale.asDiagonal());
    return min_eigenvalue(0.5 * (S + S.transpose()));
}

// ---------------------------------------------------------------------------

/// Checks the undelayed-loop conditions
///   Pbar = 2 sigma P - sigma/4 sum_i (mu_i D + c_i I) >= (kappa/2) P,
///   Dbar_i = (1 - sigma/mu_i) D - sigma/2 (lambda_m2 + lambda_s2) I >= 0,
///   Kbar_i >= (kappa/2) lambda_i2 I,
/// where the gain schedule K = K0 + sigma c |qd|^2 I (c >= c_i) reduces the
/// last one to K0 >= (omega_i + sigma lambda_i2 + kappa lambda_i2 / 2) I.
inline Certificate certify_nodelay(const GainSet& g, const SidePair<BoundConstants>& bounds,
                                   const TheoremParams& tp, double tau_bar)
{
    g.validate(g.dof());
    tp.validate_nodelay();
    for (Side s : kSides) {
        bounds[s].validate();
    }
    detail::require(tau_bar >= 0.0 && std::isfinite(tau_bar), "certify: tau_bar must be >= 0");

    Certificate cert;
    cert.mode = CertMode::nodelay;
    cert.tau_bar = tau_bar;
    auto& out = cert.conditions;
    const double sigma = g.sigma;
    const double kappa = tp.kappa;
    const double lam2_sum = bounds.master.lambda2 + bounds.slave.lambda2;

    for (Side s : kSides) {
        detail::add(out, "σ < μ_i", detail::scope_of(s), tp.mu[s] - sigma, true);
    }
    for (Side s : kSides) {
        detail::add(out, "c ≥ c_i", detail::scope_of(s), g.c - bounds[s].c);
    }

    const Diagonal p_bar = 2.0 * sigma * g.p.array() -
                           0.25 * sigma *
                               (tp.mu.master * g.d.array() + bounds.master.c +
                                tp.mu.slave * g.d.array() + bounds.slave.c);
    detail::add(out, "P̄ ⪰ (κ/2)P", "shared", detail::min_entry(p_bar - 0.5 * kappa * g.p));

    for (Side s : kSides) {
        const Diagonal d_bar = (1.0 - sigma / tp.mu[s]) * g.d.array() - 0.5 * sigma * lam2_sum;
        detail::add(out, "D̄_i ⪰ 0", detail::scope_of(s), detail::min_entry(d_bar));
    }
    for (Side s : kSides) {
        const double lam2 = bounds[s].lambda2;
        const double need = tp.omega[s] + sigma * lam2 + 0.5 * kappa * lam2;
        detail::add(out, "K̄_i ⪰ (κ/2)λ_i2 I", detail::scope_of(s), g.k0.minCoeff() - need);
    }

    cert.pass = std::all_of(out.begin(), out.end(), [](const Condition& c) { return c.satisfied(); });

    cert.kappa = kappa;
    cert.omega = std::min(tp.omega.master, tp.omega.slave);
    cert.p_min = g.p.minCoeff();
    cert.p_max = g.p.maxCoeff();
    cert.a1 = 1.0 / (4.0 / bounds.master.lambda1 + 4.0 / bounds.slave.lambda1 +
                     (8.0 * sigma * sigma + 2.0) / cert.p_min);
    cert.a2 = std::max({bounds.master.lambda2, bounds.slave.lambda2,
                        0.5 * (cert.p_max + 2.0 * lam2_sum * sigma * sigma)});
    return cert;
}

/// Checks the delayed-loop conditions for the shared ProxyGainSet:
///   sigma < mu_i, sigma_hat < nu, Pbar_i > 0, I - (nu/4) D_hat > 0, P~ > 0,
///   Kbar_i >= (psi/2) lambda_i2 I, K~_i >= (psi/2) M_hat, Dbar_i >= 0, D~_i >= 0,
/// then extracts delta and sets kappa = min(psi, delta, gamma).
///
/// K~_i = K_hat - sigma_hat zeta_i M_hat^2 (P_hat^2 + P_i^2)
///        - (d_bar_j e^{gamma d_bar_j} / 4) (sigma_hat K_hat + I)^2 P_hat^2 Q_j^{-1},
/// D~_i = (1 - sigma_hat/nu) D_hat - d_bar_i Q_i
///        - (sigma lambda_i2 / 2 + sigma_hat (1/zeta_i + 1/(2 zeta_j))) I.
/// With M_hat = I and zeta_m = zeta_s these are the textbook expressions; the
/// delay penalty carries e^{+gamma d_bar}, the inverse of the weight e^{-gamma d_bar}
/// that the Krasovskii term leaves on the delayed window.
inline Certificate certify_delayed(const ProxyGainSet& pg, const SidePair<BoundConstants>& bounds,
                                   const TheoremParams& tp, double tau_bar)
{
    const auto n = pg.dof();
    pg.validate(n);
    tp.validate_delayed(n);
    for (Side s : kSides) {
        bounds[s].validate();
    }
    detail::require(tau_bar >= 0.0 && std::isfinite(tau_bar), "certify: tau_bar must be >= 0");

    Certificate cert;
    cert.mode = CertMode::delayed;
    cert.tau_bar = tau_bar;
    auto& out = cert.conditions;

    const GainSet& g = pg.robot;
    const double sigma = g.sigma;
    const double sh = pg.sigma_hat;
    const double psi = tp.psi;
    const Diagonal& P = pg.p_robot();
    const Diagonal& Ph = pg.p_hat;

    for (Side s : kSides) {
        detail::add(out, "σ < μ_i", detail::scope_of(s), tp.mu[s] - sigma, true);
    }
    detail::add(out, "σ̂ < ν", "shared", tp.nu - sh, true);
    for (Side s : kSides) {
        detail::add(out, "c ≥ c_i", detail::scope_of(s), g.c - bounds[s].c);
    }

    SidePair<Diagonal> p_bar;
    for (Side s : kSides) {
        p_bar[s] = sigma * P.array() - 0.25 * sigma * (bounds[s].c + tp.mu[s] * g.d.array());
        detail::add(out, "P̄_i ≻ 0", detail::scope_of(s), detail::min_entry(p_bar[s]), true);
    }
    const Diagonal A = 1.0 - 0.25 * tp.nu * pg.d_hat.array();
    detail::add(out, "I − (ν/4)D̂ ≻ 0", "shared", detail::min_entry(A), true);

    for (Side s : kSides) {
        const double lam2 = bounds[s].lambda2;
        const double need = tp.omega[s] + sigma * lam2 + 0.5 * psi * lam2;
        detail::add(out, "K̄_i ⪰ (ψ/2)λ_i2 I", detail::scope_of(s), g.k0.minCoeff() - need);
    }
    for (Side s : kSides) {
        const Side j = other(s);
        const double dj = tp.d_bar[j];
        const Diagonal coupling = sh * pg.k_hat.array() + 1.0;
        const Diagonal penalty = 0.25 * dj * std::exp(tp.gamma * dj) *
                                 (coupling.array().square() * Ph.array().square() / tp.q[j].array());
        const Diagonal k_tilde = pg.k_hat.array() -
                                 sh * tp.zeta[s] * pg.m_hat.array().square() *
                                     (Ph.array().square() + P.array().square()) -
                                 penalty.array();
        detail::add(out, "K̃_i ⪰ (ψ/2)M̂", detail::scope_of(s),
                    detail::min_entry(k_tilde - 0.5 * psi * pg.m_hat));
    }
    for (Side s : kSides) {
        const Diagonal d_bar = (1.0 - sigma / tp.mu[s]) * g.d.array() -
                               0.5 * (sigma * bounds[s].lambda2 + sh / tp.zeta[s]);
        detail::add(out, "D̄_i ⪰ 0", detail::scope_of(s), detail::min_entry(d_bar));
    }
    for (Side s : kSides) {
        const Side j = other(s);
        const double extra = 0.5 * sigma * bounds[s].lambda2 +
                             sh * (1.0 / tp.zeta[s] + 0.5 / tp.zeta[j]);
        const Diagonal d_tilde = (1.0 - sh / tp.nu) * pg.d_hat.array() -
                                 tp.d_bar[s] * tp.q[s].array() - extra;
        detail::add(out, "D̃_i ⪰ 0", detail::scope_of(s), detail::min_entry(d_tilde));
    }

    const PTildeBlocks blocks = proxy_spring_blocks(pg, p_bar, tp.nu);
    const SchurResult schur = schur_positive(blocks);
    detail::add(out, "P̃ ≻ 0", "shared", schur.margin, true);

    const Matrix p_tilde = blocks.assemble();
    const Diagonal w = P.cwiseMax(Ph);
    cert.delta = extract_delta(p_tilde, w);
    detail::add(out, "P̃ ⪰ (δ/2)max(P,P̂)", "shared", delta_margin(p_tilde, w, cert.delta));

    cert.pass = std::all_of(out.begin(), out.end(), [](const Condition& c) { return c.satisfied(); });

    cert.kappa = std::min({psi, cert.delta, tp.gamma});
    cert.omega = std::min(tp.omega.master, tp.omega.slave);
    cert.p_min = P.minCoeff();
    cert.p_max = P.maxCoeff();
    cert.phat_min = Ph.minCoeff();
    cert.phat_max = Ph.maxCoeff();
    cert.p_prime = std::min(cert.p_min, cert.phat_min);

    const double mh_min = pg.m_hat.minCoeff();
    const double mh_max = pg.m_hat.maxCoeff();
    const double Pm = cert.p_max;
    const double Phm = cert.phat_max;
    double inv_a1 = (4.0 * sigma * sigma + 8.0 * sh * sh * Pm * Pm) / cert.p_min +
                    16.0 * sh * sh * Phm * Phm / cert.phat_min;
    double a2 = 0.0;
    for (Side s : kSides) {
        inv_a1 += 4.0 / bounds[s].lambda1 + 4.0 / mh_min;
        const double lam2 = bounds[s].lambda2;
        const double qmax = tp.q[s].maxCoeff();
        a2 = std::max({a2, lam2, mh_max + 0.5 * tp.d_bar[s] * tp.d_bar[s] * qmax,
                       lam2 * sigma * sigma + 2.0 * mh_max * sh * sh * Pm * Pm + 0.5 * Pm});
    }
    // Both proxy sliding surfaces carry qhat_m - qhat_s.
    a2 = std::max(a2, 4.0 * mh_max * sh * sh * Phm * Phm + 0.5 * Phm);
    cert.a1 = 1.0 / inv_a1;
    cert.a2 = a2;
    return cert;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json to_json(const Certificate& c)
{
    nlohmann::json j;
    j["mode"] = to_string(c.mode);
    j["verdict"] = c.pass ? "pass" : "fail";
    auto& conds = j["conditions"] = nlohmann::json::array();
    for (const auto& k : c.conditions) {
        conds.push_back({{"name", k.name},
                         {"scope", k.scope},
                         {"margin", k.margin},
                         {"strict", k.strict},
                         {"satisfied", k.satisfied()}});
    }
    auto num = [](double x) -> nlohmann::json {
        return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
    };
    j["derived"] = {{"kappa", num(c.kappa)},       {"omega", num(c.omega)},
                    {"delta", num(c.delta)},       {"a1", num(c.a1)},
                    {"a2", num(c.a2)},             {"p_min", num(c.p_min)},
                    {"p_max", num(c.p_max)},       {"phat_min", num(c.phat_min)},
                    {"phat_max", num(c.phat_max)}, {"p_prime", num(c.p_prime)},
                    {"tau_bar", num(c.tau_bar)},   {"attractive_radius_sq", num(c.attractive_radius_sq())}};
    return j;
}

inline std::string render_report(const Certificate& c)
{
    std::ostringstream os;
    os.precision(6);
    os << "certificate (" << to_string(c.mode) << "): " << (c.pass ? "PASS" : "FAIL") << "\n";
    for (const auto& k : c.conditions) {
        os << "  [" << (k.satisfied() ? " ok " : "FAIL") << "] " << k.name;
        if (k.scope != "shared") {
            os << "  (" << k.scope << ")";
        }
        os << "  margin " << k.margin << "\n";
    }
    os << "derived:\n";
    os << "  kappa " << c.kappa << "  omega " << c.omega;
    if (c.mode == CertMode::delayed) {
        os << "  delta " << c.delta;
    }
    os << "\n  a1 " << c.a1 << "  a2 " << c.a2 << "\n";
    os << "  p " << c.p_min << "  P " << c.p_max;
    if (c.mode == CertMode::delayed) {
        os << "  p_hat " << c.phat_min << "  P_hat " << c.phat_max << "  p' " << c.p_prime;
    }
    os << "\n  tau_bar " << c.tau_bar << "  S_A radius^2 " << c.attractive_radius_sq() << "\n";
    os << "  S_I radius^2 = " << (c.mode == CertMode::nodelay ? 2.0 / c.p_min : 4.0 / c.p_prime)
       << " * (V0 + " << c.input_floor() << ")\n";
    return os.str();
}

} // namespace teleop
