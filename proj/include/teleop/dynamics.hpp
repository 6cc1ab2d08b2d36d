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

// Joint-space dynamics of a gravity-compensated serial planar arm with
// revolute joints:  M(q) qdd + C(q, qd) qd = tau.
//
// C is built from the Christoffel symbols of M, so Mdot - 2C is skew.

#include "teleop/random.hpp"
#include "teleop/types.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace teleop {

struct ManipulatorParams {
    Vector link_masses;
    Vector link_lengths;
    Vector com_offsets;   ///< joint axis to link center of mass
    Vector link_inertias; ///< about the link center of mass

    Eigen::Index dof() const noexcept { return link_masses.size(); }

    void validate() const
    {
        const auto n = dof();
        detail::require(n > 0, "ManipulatorParams: dof must be positive");
        detail::require_dim(link_lengths.size(), n, "link_lengths");
        detail::require_dim(com_offsets.size(), n, "com_offsets");
        detail::require_dim(link_inertias.size(), n, "link_inertias");
        detail::require(detail::all_positive(link_masses), "link_masses must be positive");
        detail::require(detail::all_positive(link_lengths), "link_lengths must be positive");
        detail::require(detail::all_positive(com_offsets), "com_offsets must be positive");
        detail::require(detail::all_positive(link_inertias), "link_inertias must be positive");
        detail::require((com_offsets.array() <= link_lengths.array()).all(),
                        "com_offsets must not exceed link_lengths");
    }

    /// Uniform-rod two-link arm: m = 1 kg, l = 1 m, lc = 0.5 m, I = 1/12 kg m^2.
    static ManipulatorParams two_link_reference()
    {
        ManipulatorParams p;
        p.link_masses = Vector::Constant(2, 1.0);
        p.link_lengths = Vector::Constant(2, 1.0);
        p.com_offsets = Vector::Constant(2, 0.5);
        p.link_inertias = Vector::Constant(2, 1.0 / 12.0);
        return p;
    }

    static ManipulatorParams pendulum(double mass, double length, double com, double inertia)
    {
        ManipulatorParams p;
        p.link_masses = Vector::Constant(1, mass);
        p.link_lengths = Vector::Constant(1, length);
        p.com_offsets = Vector::Constant(1, com);
        p.link_inertias = Vector::Constant(1, inertia);
        return p;
    }
};

struct RobotState {
    Vector q;
    Vector qdot;

    static RobotState zero(Eigen::Index dof) { return {Vector::Zero(dof), Vector::Zero(dof)}; }

    void validate(Eigen::Index dof) const
    {
        detail::require_dim(q.size(), dof, "RobotState.q");
        detail::require_dim(qdot.size(), dof, "RobotState.qdot");
        detail::require(q.allFinite() && qdot.allFinite(), "RobotState: non-finite entry");
    }
};

/// Uniform bounds lambda1 I <= M(q) <= lambda2 I and |C(q,x) y| <= c |x| |y|.
struct BoundConstants {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double c = 0.0;

    void validate() const
    {
        detail::require(lambda1 > 0.0 && lambda1 <= lambda2 && std::isfinite(lambda2),
                        "BoundConstants: need 0 < lambda1 <= lambda2 < inf");
        detail::require(c > 0.0 && std::isfinite(c), "BoundConstants: need c > 0");
    }
};

namespace detail {

// Planar kinematics of link k's center of mass. Columns of the translational
// Jacobian are J_k(:, i) = sum_{j=i}^{k-1} l_j n_j + lc_k n_k for i <= k, with
// n_j the unit normal at absolute angle phi_j = q_0 + ... + q_j.
struct PlanarKinematics {
    std::vector<double> cos_phi;
    std::vector<double> sin_phi;

    explicit PlanarKinematics(const Vector& q)
    {
        const auto n = static_cast<std::size_t>(q.size());
        cos_phi.resize(n);
        sin_phi.resize(n);
        double phi = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            phi += q[static_cast<Eigen::Index>(j)];
            cos_phi[j] = std::cos(phi);
            sin_phi[j] = std::sin(phi);
        }
    }
};

inline Eigen::Matrix2Xd com_jacobian(const ManipulatorParams& p, const PlanarKinematics& kin,
                                     Eigen::Index k)
{
    const auto n = p.dof();
    Eigen::Matrix2Xd J = Eigen::Matrix2Xd::Zero(2, n);
    for (Eigen::Index i = 0; i <= k; ++i) {
        double x = 0.0;
        double y = 0.0;
        for (Eigen::Index j = i; j < k; ++j) {
            x -= p.link_lengths[j] * kin.sin_phi[j];
            y += p.link_lengths[j] * kin.cos_phi[j];
        }
        x -= p.com_offsets[k] * kin.sin_phi[k];
        y += p.com_offsets[k] * kin.cos_phi[k];
        J(0, i) = x;
        J(1, i) = y;
    }
    return J;
}

// d J_k / d q_l. Only angles phi_j with j >= l depend on q_l.
inline Eigen::Matrix2Xd com_jacobian_partial(const ManipulatorParams& p,
                                             const PlanarKinematics& kin, Eigen::Index k,
                                             Eigen::Index l)
{
    const auto n = p.dof();
    Eigen::Matrix2Xd dJ = Eigen::Matrix2Xd::Zero(2, n);
    if (l > k) {
        return dJ;
    }
    for (Eigen::Index i = 0; i <= k; ++i) {
        double x = 0.0;
        double y = 0.0;
        for (Eigen::Index j = std::max(i, l); j < k; ++j) {
            x -= p.link_lengths[j] * kin.cos_phi[j];
            y -= p.link_lengths[j] * kin.sin_phi[j];
        }
        x -= p.com_offsets[k] * kin.cos_phi[k];
        y -= p.com_offsets[k] * kin.sin_phi[k];
        dJ(0, i) = x;
        dJ(1, i) = y;
    }
    return dJ;
}

} // namespace detail

inline Matrix mass_matrix(const ManipulatorParams& params, const Vector& q)
{
    const auto n = params.dof();
    detail::require_dim(q.size(), n, "mass_matrix: q");
    const detail::PlanarKinematics kin(q);
    Matrix M = Matrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Matrix2Xd J = detail::com_jacobian(params, kin, k);
        M.noalias() += params.link_masses[k] * (J.transpose() * J);
        // Rotational part: link k spins at qd_0 + ... + qd_k.
        M.topLeftCorner(k + 1, k + 1).array() += params.link_inertias[k];
    }
    return M;
}

/// Partial derivatives dM/dq_l, l = 0..dof-1, in closed form.
inline std::vector<Matrix> mass_matrix_partials(const ManipulatorParams& params, const Vector& q)
{
    const auto n = params.dof();
    detail::require_dim(q.size(), n, "mass_matrix_partials: q");
    const detail::PlanarKinematics kin(q);
    std::vector<Matrix> dM(static_cast<std::size_t>(n), Matrix::Zero(n, n));
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Matrix2Xd J = detail::com_jacobian(params, kin, k);
        for (Eigen::Index l = 0; l <= k; ++l) {
            const Eigen::Matrix2Xd dJ = detail::com_jacobian_partial(params, kin, k, l);
            const Matrix sym = dJ.transpose() * J;
            dM[static_cast<std::size_t>(l)] += params.link_masses[k] * (sym + sym.transpose());
        }
    }
    return dM;
}

/// C_ij = sum_l 1/2 (dM_ij/dq_l + dM_il/dq_j - dM_jl/dq_i) qd_l.
inline Matrix coriolis_matrix(const ManipulatorParams& params, const Vector& q, const Vector& qdot)
{
    const auto n = params.dof();
    detail::require_dim(q.size(), n, "coriolis_matrix: q");
    detail::require_dim(qdot.size(), n, "coriolis_matrix: qdot");
    const auto dM = mass_matrix_partials(params, q);
    Matrix C = Matrix::Zero(n, n);
    for (Eigen::Index l = 0; l < n; ++l) {
        const double w = qdot[l];
        if (w == 0.0) {
            continue;
        }
        const Matrix& dMl = dM[static_cast<std::size_t>(l)];
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double gamma = 0.5 * (dMl(i, j) + dM[static_cast<std::size_t>(j)](i, l) -
                                            dM[static_cast<std::size_t>(i)](j, l));
                C(i, j) += gamma * w;
            }
        }
    }
    return C;
}

/// Joint accelerations solving M(q) qdd + C(q, qd) qd = tau_total.
inline Vector forward_dynamics(const ManipulatorParams& params, const RobotState& state,
                               const Vector& tau_total)
{
    const auto n = params.dof();
    state.validate(n);
    detail::require_dim(tau_total.size(), n, "forward_dynamics: tau_total");
    const Matrix M = mass_matrix(params, state.q);
    const Vector rhs = tau_total - coriolis_matrix(params, state.q, state.qdot) * state.qdot;
    const Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("forward_dynamics: inertia matrix is not positive definite");
    }
    Vector qddot = llt.solve(rhs);
    if (!qddot.allFinite()) {
        throw NumericalError("forward_dynamics: non-finite acceleration");
    }
    return qddot;
}

/// Kinetic energy 1/2 qd^T M(q) qd.
inline double kinetic_energy(const ManipulatorParams& params, const RobotState& state)
{
    return 0.5 * state.qdot.dot(mass_matrix(params, state.q) * state.qdot);
}

/// Tensor grid over [-pi, pi) with `points_per_joint` points per joint.
/// The first joint of a planar arm does not enter M, so it is pinned at 0.
inline std::vector<Vector> make_joint_grid(Eigen::Index dof, int points_per_joint)
{
    detail::require(dof > 0 && points_per_joint > 0, "make_joint_grid: empty grid");
    const Eigen::Index free = dof - 1;
    std::size_t count = 1;
    for (Eigen::Index i = 0; i < free; ++i) {
        count *= static_cast<std::size_t>(points_per_joint);
    }
    std::vector<Vector> grid;
    grid.reserve(count);
    const double step = 2.0 * std::numbers::pi / points_per_joint;
    for (std::size_t idx = 0; idx < count; ++idx) {
        Vector q = Vector::Zero(dof);
        std::size_t rem = idx;
        for (Eigen::Index i = 1; i < dof; ++i) {
            q[i] = -std::numbers::pi + step * static_cast<double>(rem % static_cast<std::size_t>(points_per_joint));
            rem /= static_cast<std::size_t>(points_per_joint);
        }
        grid.push_back(std::move(q));
    }
    return grid;
}

inline std::vector<Vector> random_velocity_samples(Eigen::Index dof, std::size_t count,
                                                   std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<Vector> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(rng.normal_vector(dof));
    }
    return out;
}

inline constexpr double kDefaultBoundSafety = 1.1;

/// Sampled bound constants with a safety margin.
///
/// lambda1 and lambda2 are the extreme eigenvalues of M over `q_grid`, shrunk
/// and inflated by `safety`. For the Coriolis bound, each velocity sample x is
/// paired with the worst-case y, i.e. the spectral norm of C(q, x) / |x|.
inline BoundConstants estimate_bounds(const ManipulatorParams& params,
                                      std::span<const Vector> q_grid,
                                      std::span<const Vector> qdot_samples,
                                      double safety = kDefaultBoundSafety)
{
    params.validate();
    detail::require(!q_grid.empty(), "estimate_bounds: empty configuration grid");
    detail::require(safety >= 1.0, "estimate_bounds: safety factor must be >= 1");

    double eig_min = std::numeric_limits<double>::infinity();
    double eig_max = 0.0;
    double c_max = 0.0;
    for (const Vector& q : q_grid) {
        const Eigen::SelfAdjointEigenSolver<Matrix> es(mass_matrix(params, q),
                                                        Eigen::EigenvaluesOnly);
        eig_min = std::min(eig_min, es.eigenvalues().minCoeff());
        eig_max = std::max(eig_max, es.eigenvalues().maxCoeff());
        for (const Vector& x : qdot_samples) {
            const double xn = x.norm();
            if (xn == 0.0) {
                continue;
            }
            const Matrix C = coriolis_matrix(params, q, x);
            const Eigen::JacobiSVD<Matrix> svd(C);
            c_max = std::max(c_max, svd.singularValues()[0] / xn);
        }
    }
    if (!(eig_min > 0.0)) {
        throw NumericalError("estimate_bounds: inertia matrix lost positive definiteness");
    }
    // A 1-DOF arm has C == 0; any positive c satisfies the bilinear bound.
    constexpr double kMinCoriolisBound = 1e-9;
    return {eig_min / safety, eig_max * safety, std::max(safety * c_max, kMinCoriolisBound)};
}

/// estimate_bounds over the default 72-point-per-joint grid and 64 seeded
/// velocity directions.
inline BoundConstants estimate_bounds(const ManipulatorParams& params,
                                      double safety = kDefaultBoundSafety,
                                      std::uint64_t seed = 7)
{
    const auto grid = make_joint_grid(params.dof(), 72);
    const auto samples = random_velocity_samples(params.dof(), 64, seed);
    return estimate_bounds(params, grid, samples, safety);
}

} // namespace teleop
