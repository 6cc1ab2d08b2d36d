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

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace teleop {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Entries of a diagonal matrix. Gains in this library are diagonal, so they
/// are carried as their diagonal and applied with `cwiseProduct`.
using Diagonal = Eigen::VectorXd;

/// Raised for malformed arguments: dimension mismatches, non-positive gains,
/// queries outside a stored history.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine fails on inputs that passed validation.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Side { master = 0, slave = 1 };

constexpr Side other(Side s) noexcept
{
    return s == Side::master ? Side::slave : Side::master;
}

constexpr std::string_view to_string(Side s) noexcept
{
    return s == Side::master ? "master" : "slave";
}

/// A value held once per teleoperator side.
template <class T>
struct SidePair {
    T master{};
    T slave{};

    T& operator[](Side s) noexcept { return s == Side::master ? master : slave; }
    const T& operator[](Side s) const noexcept { return s == Side::master ? master : slave; }
};

inline constexpr std::array<Side, 2> kSides{Side::master, Side::slave};

namespace detail {

inline void require(bool cond, const std::string& what)
{
    if (!cond) {
        throw InputError(what);
    }
}

inline void require_dim(Eigen::Index got, Eigen::Index want, std::string_view name)
{
    if (got != want) {
        throw InputError(std::string(name) + ": dimension " + std::to_string(got) +
                         ", expected " + std::to_string(want));
    }
}

inline bool all_positive(const Eigen::Ref<const Vector>& v)
{
    return v.size() > 0 && (v.array() > 0.0).all() && v.allFinite();
}

inline bool all_finite(const Eigen::Ref<const Vector>& v) { return v.allFinite(); }

} // namespace detail

} // namespace teleop
