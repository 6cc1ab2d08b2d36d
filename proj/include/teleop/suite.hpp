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

// Predefined scenario matrices and a small parallel runner.

#include "teleop/analysis.hpp"
#include "teleop/io.hpp"
#include "teleop/presets.hpp"
#include "teleop/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace teleop {

inline constexpr const char* kWorkersEnv = "TELEOP_ISS_WORKERS";

/// Worker count from TELEOP_ISS_WORKERS, else the hardware concurrency.
inline unsigned worker_count()
{
    if (const char* env = std::getenv(kWorkersEnv); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) {
            return static_cast<unsigned>(v);
        }
        throw InputError(std::string(kWorkersEnv) + " must be a positive integer, got '" + env + "'");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Results must be
/// stored by index; the first exception is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn)
{
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    auto body = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        body();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(body);
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

enum class Expectation { pass, decay_violation };

struct SuiteCase {
    Scenario scenario;
    AnalysisOptions options;
    Expectation expect = Expectation::pass;
};

struct SuiteRow {
    std::string id;
    LoopMode mode = LoopMode::nodelay;
    bool certified = false;
    double kappa = 0.0;
    std::optional<double> fitted_rate;
    double max_error = 0.0;
    double attractive_radius_sq = 0.0;
    std::optional<double> entry_time;
    std::optional<double> divergence_time;
    Expectation expect = Expectation::pass;
    bool verdict = false; ///< all analysis checks passed
    bool ok = false;      ///< verdict matches the expectation
};

struct SuiteResult {
    std::string name;
    std::vector<SuiteRow> rows;
    bool ok() const
    {
        return std::all_of(rows.begin(), rows.end(), [](const SuiteRow& r) { return r.ok; });
    }
};

inline bool matches(Expectation e, const SimulationTrace& trace, const SetReport& r)
{
    switch (e) {
    case Expectation::pass:
        return r.certified && r.pass();
    case Expectation::decay_violation:
        return trace.diverged() || !r.decay.pass;
    }
    return false;
}

namespace suites {

inline Vector vec2(double a, double b)
{
    Vector v(2);
    v << a, b;
    return v;
}

/// Operator and environment torque profiles, each with a declared bound.
inline std::vector<std::pair<std::string, SidePair<TorqueProfile>>> torque_matrix()
{
    return {
        {"zero", {TorqueProfile::zero(), TorqueProfile::zero()}},
        {"step", {TorqueProfile::step(vec2(1.0, 0.0), 1.0), TorqueProfile::zero()}},
        {"sinusoid",
         {TorqueProfile::sinusoid(vec2(1.0, 0.0), 0.5), TorqueProfile::sinusoid(vec2(0.3, 0.4), 0.3)}},
    };
}

inline SidePair<TorqueProfile> delayed_torque()
{
    return {TorqueProfile::sinusoid(vec2(1.0, 0.0), 0.5), TorqueProfile::sinusoid(vec2(0.3, 0.4), 0.3)};
}

inline std::vector<std::pair<std::string, SidePair<DelayProfile>>> delay_matrix(std::uint64_t seed)
{
    return {
        {"constant", presets::constant_delays(0.2, 0.5)},
        {"sinusoidal", presets::sinusoidal_delays(0.25, 0.2, 0.5, 0.5)},
        {"random-walk", presets::random_walk_delays(0.5, seed)},
    };
}

/// Gain set whose damping covers about 1/30 of what the undelayed damping
/// condition asks for, driven by a slow 1 N m sinusoid on the master.
inline presets::NodelayPreset negative_preset()
{
    return presets::nodelay_preset("neg", 1.0, 2.0, 0.1, 1.0, 0.2, 0.5);
}

inline Scenario negative_scenario(std::uint64_t seed, std::size_t k)
{
    Rng rng(presets::derive_seed(seed, 100 + k));
    Scenario sc = presets::nodelay_scenario("negative-" + std::to_string(k), negative_preset());
    const double freq = rng.uniform(0.1, 0.25);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double angle = rng.uniform(-0.5, 0.5);
    sc.torque = {TorqueProfile::sinusoid(vec2(std::cos(angle), std::sin(angle)), freq, phase),
                 TorqueProfile::zero()};
    sc.seed = seed;
    return sc;
}

inline AnalysisOptions delayed_options()
{
    AnalysisOptions o;
    o.eps_num = 2e-2;
    o.invariant_inflation = 2e-2;
    o.attractive_inflation = 2e-2;
    return o;
}

inline std::vector<SuiteCase> acceptance(std::uint64_t seed)
{
    std::vector<SuiteCase> out;
    for (const auto& p : presets::nodelay_presets()) {
        for (const auto& [tname, tq] : torque_matrix()) {
            Scenario sc = presets::nodelay_scenario(p.name + "-" + tname, p);
            sc.torque = tq;
            sc.seed = seed;
            out.push_back({std::move(sc), {}, Expectation::pass});
        }
    }
    for (const auto& p : presets::delayed_presets()) {
        for (const auto& [dname, delay] : delay_matrix(seed)) {
            Scenario sc = presets::delayed_scenario(p.name + "-" + dname, p, delay);
            sc.torque = delayed_torque();
            sc.seed = seed;
            out.push_back({std::move(sc), delayed_options(), Expectation::pass});
        }
    }
    {
        Scenario sc = presets::delayed_scenario("dl-stiff-zero-delay", presets::stiff_spring_preset(),
                                                presets::constant_delays(0.0, 0.0));
        sc.seed = seed;
        out.push_back({std::move(sc), {}, Expectation::pass});
    }
    for (std::size_t k = 0; k < 5; ++k) {
        out.push_back({negative_scenario(seed, k), {}, Expectation::decay_violation});
    }
    return out;
}

inline std::vector<SuiteCase> sweep_delay(std::uint64_t seed)
{
    std::vector<SuiteCase> out;
    for (double d_bar : {0.0, 0.1, 0.2, 0.5}) {
        const auto p = presets::delayed_presets(d_bar).front();
        char id[64];
        std::snprintf(id, sizeof id, "%s-dbar-%.1f", p.name.c_str(), d_bar);
        Scenario sc = presets::delayed_scenario(id, p, presets::constant_delays(d_bar, d_bar));
        sc.torque = delayed_torque();
        sc.seed = seed;
        out.push_back({std::move(sc), delayed_options(), Expectation::pass});
    }
    return out;
}

inline std::vector<SuiteCase> sweep_gains(std::uint64_t seed)
{
    std::vector<SuiteCase> out;
    for (double p : {20.0, 40.0, 80.0}) {
        auto preset = presets::nodelay_presets().front();
        preset.gains.p = presets::diag(2, p);
        Scenario sc = presets::nodelay_scenario("nd-a-p-" + std::to_string(static_cast<int>(p)), preset);
        sc.torque = {TorqueProfile::step(vec2(1.0, 0.0), 1.0), TorqueProfile::zero()};
        sc.seed = seed;
        out.push_back({std::move(sc), {}, Expectation::pass});
    }
    return out;
}

} // namespace suites

inline const std::vector<std::string>& suite_names()
{
    static const std::vector<std::string> names{"acceptance", "sweep-delay", "sweep-gains"};
    return names;
}

inline std::vector<SuiteCase> suite_cases(const std::string& name, std::uint64_t seed)
{
    if (name == "acceptance") return suites::acceptance(seed);
    if (name == "sweep-delay") return suites::sweep_delay(seed);
    if (name == "sweep-gains") return suites::sweep_gains(seed);
    throw InputError("unknown suite '" + name + "' (acceptance, sweep-delay, sweep-gains)");
}

inline std::string to_string(Expectation e) { return e == Expectation::pass ? "pass" : "decay-violation"; }

inline std::string summary_csv(const SuiteResult& r)
{
    std::ostringstream os;
    os << "scenario,mode,certified,kappa,fitted_rate,max_error,sa_radius_sq,sa_entry_time,"
          "divergence_time,expected,verdict,outcome\n";
    auto opt = [](const std::optional<double>& v, const char* none) {
        return v ? format_double(*v) : std::string(none);
    };
    for (const auto& row : r.rows) {
        os << row.id << ',' << to_string(row.mode) << ',' << (row.certified ? "yes" : "no") << ','
           << format_double(row.kappa) << ',' << opt(row.fitted_rate, "") << ','
           << format_double(row.max_error) << ',' << format_double(row.attractive_radius_sq) << ','
           << opt(row.entry_time, "not-reached") << ',' << opt(row.divergence_time, "") << ','
           << to_string(row.expect) << ',' << (row.verdict ? "pass" : "fail") << ','
           << (row.ok ? "ok" : "MISMATCH") << '\n';
    }
    return os.str();
}

inline std::string summary_table(const SuiteResult& r)
{
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-28s %-8s %-5s %8s %8s %10s %10s %-16s %s\n", "scenario", "mode",
                  "cert", "kappa", "rate", "max|e|", "S_A r^2", "expected", "outcome");
    os << line;
    for (const auto& row : r.rows) {
        std::snprintf(line, sizeof line, "%-28s %-8s %-5s %8.4f %8.3f %10.3e %10.3e %-16s %s\n",
                      row.id.c_str(), to_string(row.mode).c_str(), row.certified ? "yes" : "no",
                      row.kappa, row.fitted_rate.value_or(std::nan("")), row.max_error,
                      row.attractive_radius_sq, to_string(row.expect).c_str(),
                      row.ok ? "ok" : "MISMATCH");
        os << line;
    }
    os << (r.ok() ? "suite passed" : "suite FAILED") << " (" << r.rows.size() << " runs)\n";
    return os.str();
}

struct SuiteOptions {
    std::uint64_t seed = 1;
    std::optional<std::string> out_dir;
    std::size_t trace_stride = 10; ///< every k-th sample goes to the suite trace CSVs
    unsigned workers = 1;
};

inline SimulationTrace decimate(const SimulationTrace& trace, std::size_t stride)
{
    SimulationTrace out;
    out.meta = trace.meta;
    out.divergence = trace.divergence;
    for (std::size_t k = 0; k < trace.samples.size(); k += std::max<std::size_t>(stride, 1)) {
        out.samples.push_back(trace.samples[k]);
    }
    if (!trace.samples.empty() && (trace.samples.size() - 1) % std::max<std::size_t>(stride, 1) != 0) {
        out.samples.push_back(trace.samples.back());
    }
    return out;
}

/// Runs every case of the named suite. When `out_dir` is set, writes
/// summary.csv, summary.txt and per-run trace CSV/JSON pairs into it.
inline SuiteResult run_suite(const std::string& name, const SuiteOptions& opt)
{
    const auto cases = suite_cases(name, opt.seed);
    SuiteResult result;
    result.name = name;
    result.rows.resize(cases.size());
    if (opt.out_dir) {
        std::filesystem::create_directories(*opt.out_dir);
    }
    parallel_for(cases.size(), opt.workers, [&](std::size_t i) {
        const SuiteCase& c = cases[i];
        const SimulationTrace trace = run(c.scenario);
        const SetReport report = analyze(trace, c.options);
        SuiteRow& row = result.rows[i];
        row.id = c.scenario.id;
        row.mode = c.scenario.mode;
        row.certified = report.certified;
        row.kappa = report.kappa;
        row.fitted_rate = report.decay.fitted_rate;
        row.max_error = std::sqrt(report.sets.max_error_sq);
        row.attractive_radius_sq = report.sets.attractive_radius_sq;
        row.entry_time = report.sets.entry_time;
        if (trace.divergence) {
            row.divergence_time = trace.divergence->t;
        }
        row.expect = c.expect;
        row.verdict = report.pass();
        row.ok = matches(c.expect, trace, report);
        if (opt.out_dir) {
            write_trace_files(*opt.out_dir, c.scenario.id, decimate(trace, opt.trace_stride), &report);
        }
    });
    if (opt.out_dir) {
        write_text(*opt.out_dir + "/summary.csv", summary_csv(result));
        write_text(*opt.out_dir + "/summary.txt", summary_table(result));
    }
    return result;
}

} // namespace teleop
