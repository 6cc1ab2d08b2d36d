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
#include "teleop/dynamics.hpp"
#include "teleop/random.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace {

using namespace teleop;

const double kPi = std::numbers::pi;

Vector v2(double a, double b)
{
    Vector v(2);
    v << a, b;
    return v;
}

double max_eig(const Matrix& M)
{
    return Eigen::SelfAdjointEigenSolver<Matrix>(M).eigenvalues().maxCoeff();
}

double min_eig(const Matrix& M)
{
    return Eigen::SelfAdjointEigenSolver<Matrix>(M).eigenvalues().minCoeff();
}

class ReferenceArm : public ::testing::Test {
protected:
    ManipulatorParams arm = ManipulatorParams::two_link_reference();
};

TEST_F(ReferenceArm, InertiaAtStretchedPose)
{
    const Matrix M = mass_matrix(arm, v2(0.0, 0.0));
    EXPECT_NEAR(M(0, 0), 2.66667, 1e-4);
    EXPECT_NEAR(M(0, 1), 0.83333, 1e-4);
    EXPECT_NEAR(M(1, 1), 0.33333, 1e-4);
    EXPECT_TRUE(M.isApprox(oracle::mass_matrix(arm, v2(0.0, 0.0)), 1e-8));
}

TEST_F(ReferenceArm, InertiaAtRightAngle)
{
    const Matrix M = mass_matrix(arm, v2(0.0, kPi / 2));
    EXPECT_NEAR(M(0, 0), 1.66667, 1e-4);
    EXPECT_NEAR(M(0, 1), 0.33333, 1e-4);
    EXPECT_NEAR(M(1, 1), 0.33333, 1e-4);
}

TEST_F(ReferenceArm, InertiaMatchesLagrangianOracleAndIsSymmetric)
{
    Rng rng(11);
    for (int k = 0; k < 200; ++k) {
        const Vector q = rng.uniform_vector(2, -kPi, kPi);
        const Matrix M = mass_matrix(arm, q);
        EXPECT_EQ(M, M.transpose());
        EXPECT_LT((M - oracle::mass_matrix(arm, q)).cwiseAbs().maxCoeff(), 1e-7);
    }
}

TEST_F(ReferenceArm, CoriolisVanishesCases)
{
    EXPECT_EQ(coriolis_matrix(arm, v2(0.3, 1.1), v2(0.0, 0.0)).cwiseAbs().maxCoeff(), 0.0);
    Rng rng(3);
    for (int k = 0; k < 20; ++k) {
        const Vector qd = rng.normal_vector(2);
        EXPECT_LT(coriolis_matrix(arm, v2(rng.uniform(-3, 3), 0.0), qd).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST_F(ReferenceArm, CoriolisExample)
{
    const Vector q = v2(0.0, kPi / 2);
    const Vector qd = v2(1.0, 1.0);
    const Vector cq = coriolis_matrix(arm, q, qd) * qd;
    EXPECT_NEAR(cq[0], -1.5, 1e-6);
    EXPECT_NEAR(cq[1], 0.5, 1e-6);
    EXPECT_LT((cq - oracle::coriolis_times_velocity(arm, q, qd)).norm(), 1e-6);
}

TEST_F(ReferenceArm, CoriolisMatchesChristoffelOracle)
{
    Rng rng(5);
    for (int k = 0; k < 200; ++k) {
        const Vector q = rng.uniform_vector(2, -kPi, kPi);
        const Vector qd = rng.normal_vector(2);
        EXPECT_LT((coriolis_matrix(arm, q, qd) * qd - oracle::coriolis_times_velocity(arm, q, qd)).norm(),
                  1e-7);
    }
}

TEST(Dynamics, SkewSymmetryOnThreeLinks)
{
    ManipulatorParams arm;
    arm.link_masses = v2(1.0, 2.0);
    arm.link_masses.conservativeResize(3);
    arm.link_masses[2] = 0.7;
    arm.link_lengths = Vector::Constant(3, 0.8);
    arm.com_offsets = Vector::Constant(3, 0.3);
    arm.link_inertias = Vector::Constant(3, 0.05);
    Rng rng(9);
    for (int k = 0; k < 1000; ++k) {
        const Vector q = rng.uniform_vector(3, -kPi, kPi);
        const Vector qd = rng.normal_vector(3);
        const Vector z = rng.normal_vector(3);
        const Matrix N = oracle::mass_matrix_rate(arm, q, qd) - 2.0 * coriolis_matrix(arm, q, qd);
        EXPECT_LT(std::abs(z.dot(N * z)), 1e-8 * z.squaredNorm());
    }
}

TEST_F(ReferenceArm, ForwardDynamicsExamples)
{
    const RobotState rest{v2(0.2, 0.4), v2(0.0, 0.0)};
    EXPECT_EQ(forward_dynamics(arm, rest, v2(0.0, 0.0)).norm(), 0.0);

    const RobotState moving{v2(0.2, 0.4), v2(1.3, -0.7)};
    const Vector cancel = coriolis_matrix(arm, moving.q, moving.qdot) * moving.qdot;
    EXPECT_LT(forward_dynamics(arm, moving, cancel).norm(), 1e-12);

    const RobotState bent{v2(0.0, kPi / 2), v2(0.0, 0.0)};
    const Vector qdd = forward_dynamics(arm, bent, v2(1.0, 0.0));
    EXPECT_NEAR(qdd[0], 0.75, 1e-3);
    EXPECT_NEAR(qdd[1], -0.75, 1e-3);
    EXPECT_LT((oracle::mass_matrix(arm, bent.q) * qdd - v2(1.0, 0.0)).norm(), 1e-7);
}

TEST_F(ReferenceArm, DimensionMismatchThrows)
{
    EXPECT_THROW(mass_matrix(arm, Vector::Zero(3)), InputError);
    EXPECT_THROW(coriolis_matrix(arm, v2(0, 0), Vector::Zero(1)), InputError);
}

TEST_F(ReferenceArm, EstimatedBounds)
{
    const BoundConstants b = estimate_bounds(arm, 1.1);
    EXPECT_NEAR(b.lambda2, 1.1 * max_eig(oracle::mass_matrix(arm, v2(0.0, 0.0))), 1e-6);
    // Largest eigenvalue of [[8/3, 5/6], [5/6, 1/3]] in closed form.
    const double tr = 3.0, det = 8.0 / 9.0 - 25.0 / 36.0;
    EXPECT_NEAR(b.lambda2, 1.1 * (0.5 * tr + std::sqrt(0.25 * tr * tr - det)), 1e-6);
    EXPECT_GE(b.c, 0.5);
    EXPECT_GT(b.lambda1, 0.0);

    Rng rng(21);
    for (int k = 0; k < 2000; ++k) {
        const Vector q = rng.uniform_vector(2, -10.0, 10.0);
        const Matrix M = mass_matrix(arm, q);
        EXPECT_GE(min_eig(M), b.lambda1);
        EXPECT_LE(max_eig(M), b.lambda2);
        const Vector x = rng.normal_vector(2);
        const Vector y = rng.normal_vector(2);
        EXPECT_LE((coriolis_matrix(arm, q, x) * y).norm(), b.c * x.norm() * y.norm());
    }
}

TEST(Dynamics, PendulumBoundsAreConstant)
{
    const auto pend = ManipulatorParams::pendulum(2.0, 1.0, 0.5, 0.1);
    const BoundConstants b = estimate_bounds(pend, 1.3);
    EXPECT_NEAR(b.lambda1, b.lambda2 / (1.3 * 1.3), 1e-12);
    EXPECT_NEAR(mass_matrix(pend, Vector::Constant(1, 0.7))(0, 0), 2.0 * 0.25 + 0.1, 1e-12);
}

TEST(Dynamics, EstimateBoundsRejectsBadInput)
{
    const auto arm = ManipulatorParams::two_link_reference();
    std::vector<Vector> empty;
    std::vector<Vector> samples{v2(1, 0)};
    EXPECT_THROW(estimate_bounds(arm, empty, samples, 1.1), InputError);
    EXPECT_THROW(estimate_bounds(arm, 0.9), InputError);
}

TEST(Dynamics, InvalidParamsRejected)
{
    auto arm = ManipulatorParams::two_link_reference();
    arm.com_offsets[1] = 1.5;
    EXPECT_THROW(arm.validate(), InputError);
    arm = ManipulatorParams::two_link_reference();
    arm.link_masses[0] = 0.0;
    EXPECT_THROW(arm.validate(), InputError);
}

} // namespace
