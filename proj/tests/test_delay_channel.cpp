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


#include "teleop/delay_channel.hpp"

#include <gtest/gtest.h>

namespace {

using namespace teleop;

Vector scalar(double x) { return Vector::Constant(1, x); }

TEST(DelayProfile, ConstantIsConstant)
{
    const DelayProcess p(DelayProfile::constant(0.2, 0.5), 10.0);
    for (double t = 0.0; t < 10.0; t += 0.37) {
        EXPECT_EQ(p.at(t), 0.2);
    }
    EXPECT_EQ(delay_at(DelayProfile::constant(0.2, 0.5), 3.0), 0.2);
}

TEST(DelayProfile, SinusoidStaysInBounds)
{
    const DelayProcess p(DelayProfile::sinusoidal(0.25, 0.2, 0.5, 0.5), 10.0);
    double lo = 1.0, hi = 0.0;
    for (int k = 0; k <= 100000; ++k) {
        const double d = p.at(1e-4 * k);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    EXPECT_GE(lo, 0.0);
    EXPECT_LE(hi, 0.5);
    EXPECT_NEAR(lo, 0.05, 1e-6);
    EXPECT_NEAR(hi, 0.45, 1e-6);

    // Out-of-range parameters are clipped, not rejected.
    const DelayProcess wide(DelayProfile::sinusoidal(0.25, 0.6, 2.0, 0.5), 5.0);
    for (int k = 0; k <= 5000; ++k) {
        const double d = wide.at(1e-3 * k);
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 0.5);
    }
}

TEST(DelayProfile, RandomWalkIsSeededAndBounded)
{
    const auto prof = DelayProfile::random_walk(0.25, 0.05, 0.01, 0.5, 42);
    const DelayProcess a(prof, 20.0);
    const DelayProcess b(prof, 20.0);
    auto other = prof;
    other.seed = 43;
    const DelayProcess c(other, 20.0);
    bool differs = false;
    for (int k = 0; k <= 20000; ++k) {
        const double t = 1e-3 * k;
        EXPECT_EQ(a.at(t), b.at(t));
        EXPECT_GE(a.at(t), 0.0);
        EXPECT_LE(a.at(t), 0.5);
        differs = differs || a.at(t) != c.at(t);
    }
    EXPECT_TRUE(differs);
    EXPECT_EQ(delay_at(prof, 7.3), a.at(7.3));
}

TEST(DelayProfile, Validation)
{
    EXPECT_THROW(DelayProfile::constant(0.1, -1.0).validate(), InputError);
    EXPECT_THROW(DelayProfile::random_walk(0.1, 0.01, 0.0, 0.5, 1).validate(), InputError);
    EXPECT_EQ(delay_kind_from_string(to_string(DelayKind::random_walk)), DelayKind::random_walk);
    EXPECT_THROW(delay_kind_from_string("gamma"), InputError);
}

TEST(SignalHistory, FirstPushKeepsInitialHistory)
{
    auto h = SignalHistory::constant(0.5, 0.01, scalar(3.0));
    h.push(0.0, scalar(3.0));
    EXPECT_EQ(h.size(), 1u);
    EXPECT_EQ(h.sample(-0.5)[0], 3.0);
    EXPECT_EQ(h.sample(0.0)[0], 3.0);
    EXPECT_THROW(h.sample(-0.6), InputError);
    EXPECT_THROW(h.sample(0.01), InputError);
}

TEST(SignalHistory, ExactAtStoredSamplesAndLinearSignals)
{
    const double a = 1.7;
    const double step = 0.01;
    auto h = SignalHistory(0.5, step, [a](double t) { return scalar(a * t); });
    for (int k = 0; k <= 1000; ++k) {
        h.push(step * k, scalar(a * step * k));
    }
    const double last = h.last_time();
    EXPECT_EQ(h.sample_delayed(last, 0.0)[0], h.last_value()[0]);
    for (double d = 0.0; d <= 0.5; d += 0.0123) {
        EXPECT_NEAR(h.sample_delayed(last - 0.004, d)[0], a * (last - 0.004 - d), 1e-12);
    }
    EXPECT_THROW(h.sample_delayed(last, 0.6), InputError);
    EXPECT_THROW(h.sample_delayed(last, -0.1), InputError);
}

TEST(SignalHistory, ConstantSignal)
{
    auto h = SignalHistory::constant(0.3, 0.01, scalar(-2.0));
    for (int k = 0; k <= 200; ++k) {
        h.push(0.01 * k, scalar(-2.0));
    }
    for (double d = 0.0; d <= 0.3; d += 0.01) {
        EXPECT_EQ(h.sample_delayed(h.last_time(), d)[0], -2.0);
    }
}

TEST(SignalHistory, RetentionCoversWindow)
{
    const double d_bar = 0.2, step = 0.003;
    auto h = SignalHistory::constant(d_bar, step, scalar(0.0));
    for (int k = 0; k <= 3000; ++k) {
        const double t = step * k;
        h.push(t, scalar(std::sin(t)));
        EXPECT_LE(h.first_time(), std::max(0.0, t - d_bar));
        EXPECT_NO_THROW(h.sample_delayed(t, d_bar));
    }
    EXPECT_LT(h.size(), static_cast<std::size_t>(d_bar / step) + 5);
}

TEST(SignalHistory, InterpolantStaysInBracket)
{
    auto h = SignalHistory::constant(1.0, 0.05, scalar(0.0));
    double t = 0.0;
    for (int k = 0; k < 100; ++k) {
        h.push(t, scalar(std::cos(7.0 * t) + 0.3 * (k % 3)));
        t += 0.05;
    }
    const auto& s = h.samples();
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const double lo = std::min(s[i].second[0], s[i + 1].second[0]);
        const double hi = std::max(s[i].second[0], s[i + 1].second[0]);
        for (double w : {0.1, 0.5, 0.93}) {
            const double v = h.sample((1 - w) * s[i].first + w * s[i + 1].first)[0];
            EXPECT_GE(v, lo - 1e-15);
            EXPECT_LE(v, hi + 1e-15);
        }
    }
}

TEST(SignalHistory, RejectsNonMonotonePush)
{
    auto h = SignalHistory::constant(0.5, 0.01, scalar(0.0));
    h.push(0.0, scalar(0.0));
    h.push(0.01, scalar(1.0));
    EXPECT_THROW(h.push(0.01, scalar(2.0)), InputError);
    EXPECT_THROW(h.push(0.005, scalar(2.0)), InputError);
    EXPECT_THROW(h.push(0.02, Vector::Zero(2)), InputError);
}

} // namespace
