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

// Bounded time-varying communication delay 0 <= d(t) <= d_bar and the dense
// signal history a receiver reads delayed values from.

#include "teleop/random.hpp"
#include "teleop/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace teleop {

enum class DelayKind { constant, sinusoidal, random_walk };

inline std::string to_string(DelayKind k)
{
    switch (k) {
    case DelayKind::constant: return "constant";
    case DelayKind::sinusoidal: return "sinusoidal";
    case DelayKind::random_walk: return "random-walk";
    }
    return "unknown";
}

inline DelayKind delay_kind_from_string(const std::string& s)
{
    if (s == "constant") return DelayKind::constant;
    if (s == "sinusoidal") return DelayKind::sinusoidal;
    if (s == "random-walk" || s == "uniform-random-walk") return DelayKind::random_walk;
    throw InputError("unknown delay kind '" + s + "'");
}

struct DelayProfile {
    DelayKind kind = DelayKind::constant;
    double d_bar = 0.0;
    double mean = 0.0;      ///< constant value, sinusoid offset, or walk start
    double amplitude = 0.0; ///< sinusoidal
    double frequency = 0.0; ///< sinusoidal [Hz]
    double phase = 0.0;     ///< sinusoidal [rad]
    double step_bound = 0.0;    ///< random walk: max change per knot
    double step_period = 0.01;  ///< random walk: knot spacing [s]
    std::uint64_t seed = 0;

    void validate() const
    {
        detail::require(d_bar >= 0.0 && std::isfinite(d_bar), "DelayProfile.d_bar must be >= 0");
        detail::require(std::isfinite(mean) && std::isfinite(amplitude) && std::isfinite(frequency),
                        "DelayProfile: non-finite parameter");
        if (kind == DelayKind::random_walk) {
            detail::require(step_period > 0.0, "DelayProfile.step_period must be positive");
            detail::require(step_bound >= 0.0, "DelayProfile.step_bound must be >= 0");
        }
    }

    static DelayProfile constant(double d0, double d_bar)
    {
        DelayProfile p;
        p.kind = DelayKind::constant;
        p.mean = d0;
        p.d_bar = d_bar;
        return p;
    }

    static DelayProfile sinusoidal(double mean, double amplitude, double frequency, double d_bar)
    {
        DelayProfile p;
        p.kind = DelayKind::sinusoidal;
        p.mean = mean;
        p.amplitude = amplitude;
        p.frequency = frequency;
        p.d_bar = d_bar;
        return p;
    }

    static DelayProfile random_walk(double start, double step_bound, double step_period,
                                    double d_bar, std::uint64_t seed)
    {
        DelayProfile p;
        p.kind = DelayKind::random_walk;
        p.mean = start;
        p.step_bound = step_bound;
        p.step_period = step_period;
        p.d_bar = d_bar;
        p.seed = seed;
        return p;
    }
};

/// Evaluates a DelayProfile. Random walks are realized once, up to `horizon`,
/// as knots reflected into [0, d_bar] and interpolated linearly between knots.
class DelayProcess {
public:
    DelayProcess(DelayProfile profile, double horizon) : profile_(std::move(profile))
    {
        profile_.validate();
        if (profile_.kind == DelayKind::random_walk) {
            const auto count = static_cast<std::size_t>(
                std::ceil(std::max(horizon, 0.0) / profile_.step_period)) + 2;
            knots_.reserve(count);
            Rng rng(profile_.seed);
            double d = clip(profile_.mean);
            knots_.push_back(d);
            for (std::size_t k = 1; k < count; ++k) {
                d += rng.uniform(-profile_.step_bound, profile_.step_bound);
                if (d < 0.0) d = -d;
                if (d > profile_.d_bar) d = 2.0 * profile_.d_bar - d;
                d = clip(d);
                knots_.push_back(d);
            }
        }
    }

    const DelayProfile& profile() const noexcept { return profile_; }
    double d_bar() const noexcept { return profile_.d_bar; }

    double at(double t) const
    {
        switch (profile_.kind) {
        case DelayKind::constant:
            return clip(profile_.mean);
        case DelayKind::sinusoidal:
            return clip(profile_.mean +
                        profile_.amplitude *
                            std::sin(2.0 * std::numbers::pi * profile_.frequency * t + profile_.phase));
        case DelayKind::random_walk: {
            const double x = std::max(t, 0.0) / profile_.step_period;
            auto k = static_cast<std::size_t>(std::floor(x));
            if (k + 1 >= knots_.size()) {
                return knots_.back();
            }
            const double w = x - static_cast<double>(k);
            return clip((1.0 - w) * knots_[k] + w * knots_[k + 1]);
        }
        }
        return 0.0;
    }

private:
    double clip(double d) const { return std::clamp(d, 0.0, profile_.d_bar); }

    DelayProfile profile_;
    std::vector<double> knots_;
};

/// d(t) for a single time. Builds the realization on every call; hot loops
/// should hold a DelayProcess instead.
inline double delay_at(const DelayProfile& p, double t)
{
    return DelayProcess(p, t).at(t);
}

/// Time-stamped samples of a vector signal covering at least [t - d_bar, t],
/// with an initial-history function for times <= 0.
///
/// Single writer. Readers may run concurrently between pushes.
class SignalHistory {
public:
    using InitialHistory = std::function<Vector(double)>;

    SignalHistory(double d_bar, double max_step, InitialHistory initial)
        : d_bar_(d_bar), max_step_(max_step), initial_(std::move(initial))
    {
        detail::require(d_bar >= 0.0 && std::isfinite(d_bar), "SignalHistory: d_bar must be >= 0");
        detail::require(max_step > 0.0, "SignalHistory: max_step must be positive");
        detail::require(static_cast<bool>(initial_), "SignalHistory: missing initial history");
    }

    /// History whose initial function is the constant `v0`.
    static SignalHistory constant(double d_bar, double max_step, Vector v0)
    {
        return SignalHistory(d_bar, max_step, [v0 = std::move(v0)](double) { return v0; });
    }

    void push(double t, Vector v)
    {
        if (!samples_.empty()) {
            if (!(t > samples_.back().first)) {
                throw InputError("SignalHistory::push: timestamp " + std::to_string(t) +
                                 " not after " + std::to_string(samples_.back().first));
            }
            detail::require_dim(v.size(), samples_.back().second.size(), "SignalHistory::push");
        }
        samples_.emplace_back(t, std::move(v));
        const double cutoff = t - d_bar_ - 2.0 * max_step_;
        while (samples_.size() > 2 && samples_[1].first <= cutoff) {
            samples_.pop_front();
        }
    }

    /// Value at absolute time `t`: the initial history for t <= 0 (and before
    /// the first sample), linear interpolation between stored samples otherwise.
    Vector sample(double t) const
    {
        if (t < -d_bar_ - kTimeTol) {
            throw InputError("SignalHistory::sample: t = " + std::to_string(t) +
                             " precedes the initial history start " + std::to_string(-d_bar_));
        }
        if (samples_.empty() || t < samples_.front().first) {
            if (t <= 0.0) {
                return initial_(t);
            }
            throw InputError("SignalHistory::sample: t = " + std::to_string(t) +
                             " is no longer retained");
        }
        if (t > samples_.back().first) {
            throw InputError("SignalHistory::sample: t = " + std::to_string(t) +
                             " is after the last sample " + std::to_string(samples_.back().first));
        }
        auto hi = std::lower_bound(samples_.begin(), samples_.end(), t,
                                   [](const auto& s, double x) { return s.first < x; });
        if (hi->first == t || hi == samples_.begin()) {
            return hi->second;
        }
        auto lo = std::prev(hi);
        const double w = (t - lo->first) / (hi->first - lo->first);
        return (1.0 - w) * lo->second + w * hi->second;
    }

    Vector sample_delayed(double t, double d) const
    {
        detail::require(d >= 0.0 && d <= d_bar_ + kTimeTol, "SignalHistory: delay outside [0, d_bar]");
        return sample(t - d);
    }

    bool empty() const noexcept { return samples_.empty(); }
    std::size_t size() const noexcept { return samples_.size(); }
    double d_bar() const noexcept { return d_bar_; }
    double first_time() const { return samples_.front().first; }
    double last_time() const { return samples_.back().first; }
    const Vector& last_value() const { return samples_.back().second; }
    const std::deque<std::pair<double, Vector>>& samples() const noexcept { return samples_; }

private:
    static constexpr double kTimeTol = 1e-12;

    double d_bar_;
    double max_step_;
    InitialHistory initial_;
    std::deque<std::pair<double, Vector>> samples_;
};

} // namespace teleop
