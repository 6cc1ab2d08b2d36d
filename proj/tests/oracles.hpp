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

// Reference computations written without the library's dynamics code, used to
// cross-check it.

#include "teleop/dynamics.hpp"

#include <cmath>

namespace oracle {

using teleop::Matrix;
using teleop::Vector;

/// Center-of-mass position of each link of a planar serial arm.
inline std::vector<Eigen::Vector2d> com_positions(const teleop::ManipulatorParams& p, const Vector& q)
{
    std::vector<Eigen::Vector2d> out;
    Eigen::Vector2d joint = Eigen::Vector2d::Zero();
    double angle = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        angle += q[i];
        const Eigen::Vector2d dir(std::cos(angle), std::sin(angle));
        out.push_back(joint + p.com_offsets[i] * dir);
        joint += p.link_lengths[i] * dir;
    }
    return out;
}

/// Kinetic energy from link velocities; COM velocities by central differences
/// of the positions along qdot.
inline double kinetic_energy(const teleop::ManipulatorParams& p, const Vector& q, const Vector& qdot)
{
    constexpr double h = 1e-6;
    const auto fwd = com_positions(p, q + h * qdot);
    const auto bwd = com_positions(p, q - h * qdot);
    double T = 0.0;
    double omega = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        const Eigen::Vector2d v = (fwd[i] - bwd[i]) / (2.0 * h);
        omega += qdot[i];
        T += 0.5 * p.link_masses[i] * v.squaredNorm() + 0.5 * p.link_inertias[i] * omega * omega;
    }
    return T;
}

/// Inertia matrix as the Hessian of T in qdot (T is exactly quadratic).
inline Matrix mass_matrix(const teleop::ManipulatorParams& p, const Vector& q)
{
    const auto n = q.size();
    Matrix M(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector ei = Vector::Unit(n, i);
        M(i, i) = 2.0 * kinetic_energy(p, q, ei);
        for (Eigen::Index j = 0; j < i; ++j) {
            const Vector ej = Vector::Unit(n, j);
            M(i, j) = kinetic_energy(p, q, ei + ej) - 0.5 * (M(i, i) + M(j, j));
            M(j, i) = M(i, j);
        }
    }
    return M;
}

/// C(q, qd) qd from Christoffel symbols of central-difference derivatives of
/// the library inertia matrix.
inline Vector coriolis_times_velocity(const teleop::ManipulatorParams& p, const Vector& q,
                                      const Vector& qdot)
{
    const auto n = q.size();
    constexpr double h = 1e-5;
    std::vector<Matrix> dM;
    for (Eigen::Index l = 0; l < n; ++l) {
        const Vector e = Vector::Unit(n, l);
        dM.push_back((teleop::mass_matrix(p, q + h * e) - teleop::mass_matrix(p, q - h * e)) / (2.0 * h));
    }
    Vector out = Vector::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double gamma = 0.5 * (dM[i](k, j) + dM[j](k, i) - dM[k](i, j));
                out[k] += gamma * qdot[i] * qdot[j];
            }
        }
    }
    return out;
}

/// dM/dt along qdot by central differences.
inline Matrix mass_matrix_rate(const teleop::ManipulatorParams& p, const Vector& q, const Vector& qdot)
{
    constexpr double h = 1e-5;
    return (teleop::mass_matrix(p, q + h * qdot) - teleop::mass_matrix(p, q - h * qdot)) / (2.0 * h);
}

/// (K0 + sigma c |qd|^2) s + P e + D qd for scalar-diagonal gains, per component.
inline Vector nodelay_torque(double k0, double sigma, double c, double p, double d, const Vector& q_i,
                             const Vector& qdot_i, const Vector& q_j)
{
    const double k = k0 + sigma * c * qdot_i.squaredNorm();
    Vector out(q_i.size());
    for (Eigen::Index r = 0; r < q_i.size(); ++r) {
        const double e = q_i[r] - q_j[r];
        out[r] = -k * (qdot_i[r] + sigma * e) - p * e - d * qdot_i[r];
    }
    return out;
}

} // namespace oracle
