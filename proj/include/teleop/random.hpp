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

#include "teleop/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace teleop {

/// Seeded generator whose real-valued draws are identical on every standard
/// library (the <random> distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal()
    {
        // Box-Muller; 1 - u keeps the log argument in (0, 1].
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    Vector uniform_vector(Eigen::Index n, double lo, double hi)
    {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            v[i] = uniform(lo, hi);
        }
        return v;
    }

    Vector normal_vector(Eigen::Index n)
    {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            v[i] = normal();
        }
        return v;
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace teleop
