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

// Scenario files (YAML), trace CSV and JSON metadata sidecars.
// The scenario schema is documented in scenarios/reference.yaml.

#include "teleop/analysis.hpp"
#include "teleop/presets.hpp"
#include "teleop/simulator.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace teleop {

/// Scenario file problem, located by key path and 1-based line.
class ConfigError : public InputError {
public:
    ConfigError(const std::string& source, int line, const std::string& key, const std::string& what)
        : InputError(format(source, line, key, what)), line_(line), key_(key)
    {
    }

    int line() const noexcept { return line_; }
    const std::string& key() const noexcept { return key_; }

private:
    static std::string format(const std::string& source, int line, const std::string& key,
                              const std::string& what)
    {
        std::string out = source.empty() ? "<scenario>" : source;
        if (line > 0) {
            out += ":" + std::to_string(line);
        }
        if (!key.empty()) {
            out += ": key '" + key + "'";
        }
        return out + ": " + what;
    }

    int line_;
    std::string key_;
};

namespace io_detail {

/// A YAML node together with its dotted key path, for diagnostics.
class Node {
public:
    Node(YAML::Node node, std::string path, const std::string* source, int fallback_line)
        : node_(std::move(node)), path_(std::move(path)), source_(source), fallback_(fallback_line)
    {
    }

    const std::string& path() const noexcept { return path_; }
    bool defined() const { return node_.IsDefined() && !node_.IsNull(); }
    bool is_map() const { return node_.IsMap(); }
    bool is_sequence() const { return node_.IsSequence(); }
    bool is_scalar() const { return node_.IsScalar(); }
    std::size_t size() const { return node_.size(); }

    int line() const
    {
        if (node_.IsDefined()) {
            const auto m = node_.Mark();
            if (m.line >= 0) {
                return m.line + 1;
            }
        }
        return fallback_;
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw ConfigError(*source_, line(), path_, what);
    }

    Node child(const std::string& key) const
    {
        if (defined() && !is_map()) {
            fail("expected a mapping");
        }
        const std::string p = path_.empty() ? key : path_ + "." + key;
        return Node(defined() ? node_[key] : YAML::Node(), p, source_, line());
    }

    Node required(const std::string& key) const
    {
        Node c = child(key);
        if (!c.defined()) {
            throw ConfigError(*source_, line(), c.path(), "missing required key");
        }
        return c;
    }

    /// Rejects keys outside `allowed`, which catches typos early.
    void only(std::initializer_list<const char*> allowed) const
    {
        if (!defined()) {
            return;
        }
        if (!is_map()) {
            fail("expected a mapping");
        }
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            bool ok = false;
            for (const char* a : allowed) {
                ok = ok || key == a;
            }
            if (!ok) {
                const std::string p = path_.empty() ? key : path_ + "." + key;
                const int line = kv.first.Mark().line >= 0 ? kv.first.Mark().line + 1 : this->line();
                throw ConfigError(*source_, line, p, "unknown key");
            }
        }
    }

    std::string str() const
    {
        if (!is_scalar()) {
            fail("expected a string");
        }
        return node_.Scalar();
    }

    double number() const
    {
        if (!is_scalar()) {
            fail("expected a number");
        }
        try {
            return node_.as<double>();
        } catch (const YAML::Exception&) {
            fail("expected a number, got '" + node_.Scalar() + "'");
        }
    }

    std::uint64_t u64() const
    {
        if (!is_scalar()) {
            fail("expected an unsigned integer");
        }
        try {
            return node_.as<std::uint64_t>();
        } catch (const YAML::Exception&) {
            fail("expected an unsigned integer, got '" + node_.Scalar() + "'");
        }
    }

    /// Scalar (broadcast) or sequence of length n.
    Vector vector(Eigen::Index n) const
    {
        if (is_scalar()) {
            return Vector::Constant(n, number());
        }
        if (!is_sequence()) {
            fail("expected a number or a list of numbers");
        }
        if (static_cast<Eigen::Index>(node_.size()) != n) {
            fail("expected " + std::to_string(n) + " entries, got " + std::to_string(node_.size()));
        }
        Vector v(n);
        for (std::size_t k = 0; k < node_.size(); ++k) {
            v(static_cast<Eigen::Index>(k)) =
                Node(node_[k], path_ + "[" + std::to_string(k) + "]", source_, line()).number();
        }
        return v;
    }

    double number_or(const std::string& key, double fallback) const
    {
        const Node c = child(key);
        return c.defined() ? c.number() : fallback;
    }

    /// Scalar applied to both sides, [master, slave], or {master:, slave:}.
    SidePair<double> per_side(double fallback) const
    {
        if (!defined()) {
            return {fallback, fallback};
        }
        if (is_scalar()) {
            const double v = number();
            return {v, v};
        }
        if (is_sequence()) {
            const Vector v = vector(2);
            return {v(0), v(1)};
        }
        only({"master", "slave"});
        return {child("master").defined() ? child("master").number() : fallback,
                child("slave").defined() ? child("slave").number() : fallback};
    }

private:
    YAML::Node node_;
    std::string path_;
    const std::string* source_;
    int fallback_;
};

inline ManipulatorParams parse_arm(const Node& n)
{
    if (!n.defined()) {
        return ManipulatorParams::two_link_reference();
    }
    n.only({"preset", "masses", "lengths", "com", "inertias"});
    const Node preset = n.child("preset");
    ManipulatorParams p;
    Eigen::Index dof = 0;
    if (preset.defined()) {
        const std::string name = preset.str();
        if (name == "two-link") {
            p = ManipulatorParams::two_link_reference();
        } else if (name == "pendulum") {
            p = ManipulatorParams::pendulum(1.0, 1.0, 0.5, 1.0 / 12.0);
        } else {
            preset.fail("unknown preset '" + name + "' (two-link, pendulum)");
        }
        dof = p.dof();
    } else {
        const Node masses = n.required("masses");
        if (!masses.is_sequence() || masses.size() == 0) {
            masses.fail("expected a non-empty list with one entry per link");
        }
        dof = static_cast<Eigen::Index>(masses.size());
        p.link_masses = masses.vector(dof);
        p.link_lengths = n.required("lengths").vector(dof);
        p.com_offsets = n.required("com").vector(dof);
        p.link_inertias = n.required("inertias").vector(dof);
    }
    if (preset.defined()) {
        // Explicit entries override the preset.
        if (n.child("masses").defined()) p.link_masses = n.child("masses").vector(dof);
        if (n.child("lengths").defined()) p.link_lengths = n.child("lengths").vector(dof);
        if (n.child("com").defined()) p.com_offsets = n.child("com").vector(dof);
        if (n.child("inertias").defined()) p.link_inertias = n.child("inertias").vector(dof);
    }
    try {
        p.validate();
    } catch (const InputError& e) {
        n.fail(e.what());
    }
    return p;
}

/// `plant:` is either one arm used on both sides or {master:, slave:}.
inline SidePair<ManipulatorParams> parse_plant(const Node& n)
{
    if (n.defined() && (n.child("master").defined() || n.child("slave").defined())) {
        n.only({"master", "slave"});
        return {parse_arm(n.child("master")), parse_arm(n.child("slave"))};
    }
    const auto arm = parse_arm(n);
    return {arm, arm};
}

struct PendingC {
    bool automatic = false;
};

inline GainSet parse_gains(const Node& n, Eigen::Index dof, PendingC& c_mode)
{
    n.only({"k0", "p", "d", "sigma", "c"});
    GainSet g;
    g.k0 = n.required("k0").vector(dof);
    g.p = n.required("p").vector(dof);
    g.d = n.required("d").vector(dof);
    g.sigma = n.required("sigma").number();
    const Node c = n.child("c");
    if (!c.defined() || (c.is_scalar() && c.str() == "auto")) {
        c_mode.automatic = true;
        g.c = 1.0; // replaced once the bounds are known
    } else {
        g.c = c.number();
    }
    return g;
}

inline TorqueProfile parse_torque(const Node& n, Eigen::Index dof)
{
    if (!n.defined()) {
        return TorqueProfile::zero();
    }
    n.only({"kind", "amplitude", "onset", "frequency", "phase", "period", "width"});
    TorqueProfile p;
    const Node kind = n.required("kind");
    try {
        p.kind = torque_kind_from_string(kind.str());
    } catch (const InputError& e) {
        kind.fail(e.what());
    }
    if (p.kind != TorqueKind::zero) {
        p.amplitude = n.required("amplitude").vector(dof);
    }
    p.onset = n.number_or("onset", 0.0);
    p.frequency = n.number_or("frequency", 0.0);
    p.phase = n.number_or("phase", 0.0);
    p.period = n.number_or("period", 1.0);
    p.width = n.number_or("width", 0.5);
    try {
        p.validate(dof);
    } catch (const InputError& e) {
        n.fail(e.what());
    }
    return p;
}

inline DelayProfile parse_delay(const Node& n, double d_bar_default, std::uint64_t seed_default)
{
    DelayProfile p = DelayProfile::constant(0.0, d_bar_default);
    p.seed = seed_default;
    if (!n.defined()) {
        return p;
    }
    n.only({"kind", "d_bar", "value", "mean", "amplitude", "frequency", "phase", "step_bound",
            "step_period", "start", "seed"});
    const Node kind = n.required("kind");
    try {
        p.kind = delay_kind_from_string(kind.str());
    } catch (const InputError& e) {
        kind.fail(e.what());
    }
    p.d_bar = n.number_or("d_bar", d_bar_default);
    switch (p.kind) {
    case DelayKind::constant:
        p.mean = n.required("value").number();
        break;
    case DelayKind::sinusoidal:
        p.mean = n.required("mean").number();
        p.amplitude = n.required("amplitude").number();
        p.frequency = n.required("frequency").number();
        p.phase = n.number_or("phase", 0.0);
        break;
    case DelayKind::random_walk:
        p.mean = n.number_or("start", 0.5 * p.d_bar);
        p.step_bound = n.required("step_bound").number();
        p.step_period = n.number_or("step_period", 0.01);
        break;
    }
    if (n.child("seed").defined()) {
        p.seed = n.child("seed").u64();
    }
    try {
        p.validate();
    } catch (const InputError& e) {
        n.fail(e.what());
    }
    return p;
}

inline RobotState parse_state(const Node& n, Eigen::Index dof)
{
    RobotState s = RobotState::zero(dof);
    if (!n.defined()) {
        return s;
    }
    n.only({"q", "qdot"});
    if (n.child("q").defined()) s.q = n.child("q").vector(dof);
    if (n.child("qdot").defined()) s.qdot = n.child("qdot").vector(dof);
    return s;
}

inline BoundConstants parse_bound(const Node& n)
{
    n.only({"lambda1", "lambda2", "c"});
    BoundConstants b;
    b.lambda1 = n.required("lambda1").number();
    b.lambda2 = n.required("lambda2").number();
    b.c = n.required("c").number();
    try {
        b.validate();
    } catch (const InputError& e) {
        n.fail(e.what());
    }
    return b;
}

inline SidePair<Diagonal> per_side_diagonal(const Node& n, Eigen::Index dof, double fallback)
{
    if (!n.defined()) {
        return {Diagonal::Constant(dof, fallback), Diagonal::Constant(dof, fallback)};
    }
    if (n.is_map()) {
        n.only({"master", "slave"});
        return {n.required("master").vector(dof), n.required("slave").vector(dof)};
    }
    const Vector v = n.vector(dof);
    return {v, v};
}

} // namespace io_detail

/// Re-seeds the scenario and every random-walk delay derived from it.
inline void apply_seed(Scenario& sc, std::uint64_t seed)
{
    sc.seed = seed;
    sc.delay.master.seed = presets::derive_seed(seed, 0);
    sc.delay.slave.seed = presets::derive_seed(seed, 1);
}

/// Parses a scenario document. `source` names the file in diagnostics.
/// Gain-schedule constants given as "auto" (or omitted) are resolved to the
/// largest Coriolis bound of the two plants.
inline Scenario parse_scenario(const std::string& text, const std::string& source = "")
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source, e.mark.line >= 0 ? e.mark.line + 1 : 0, "", e.msg);
    }
    using io_detail::Node;
    const Node doc(root, "", &source, 1);
    if (!doc.is_map()) {
        doc.fail("expected a mapping at the top level");
    }
    doc.only({"id", "mode", "plant", "gains", "proxy_gains", "theorem", "torque", "delay", "initial",
              "initial_proxy", "simulation", "bounds"});

    Scenario sc;
    if (doc.child("id").defined()) {
        sc.id = doc.child("id").str();
    }
    const Node mode = doc.required("mode");
    const std::string mode_name = mode.str();
    if (mode_name == "nodelay") {
        sc.mode = LoopMode::nodelay;
    } else if (mode_name == "delayed") {
        sc.mode = LoopMode::delayed;
    } else {
        mode.fail("expected 'nodelay' or 'delayed'");
    }

    sc.plant = io_detail::parse_plant(doc.child("plant"));
    const Eigen::Index dof = sc.plant.master.dof();
    if (sc.plant.slave.dof() != dof) {
        doc.child("plant").fail("master and slave must have the same number of links");
    }

    const Node sim = doc.child("simulation");
    sim.only({"step", "duration", "blowup", "bound_safety", "seed"});
    sc.step = sim.number_or("step", sc.step);
    sc.duration = sim.number_or("duration", sc.duration);
    sc.blowup = sim.number_or("blowup", sc.blowup);
    sc.bound_safety = sim.number_or("bound_safety", sc.bound_safety);
    sc.seed = sim.child("seed").defined() ? sim.child("seed").u64() : 0;

    io_detail::PendingC c_mode;
    const Node th = doc.child("theorem");
    th.only({"mu", "omega", "kappa", "nu", "zeta", "gamma", "psi", "d_bar", "q"});
    TheoremParams& tp = sc.theorem;
    tp.mu = th.child("mu").per_side(tp.mu.master);
    tp.omega = th.child("omega").per_side(tp.omega.master);
    tp.kappa = th.number_or("kappa", tp.kappa);
    tp.nu = th.number_or("nu", tp.nu);
    tp.zeta = th.child("zeta").per_side(tp.zeta.master);
    tp.gamma = th.number_or("gamma", tp.gamma);
    tp.psi = th.number_or("psi", tp.psi);
    tp.d_bar = th.child("d_bar").per_side(0.0);
    tp.q = io_detail::per_side_diagonal(th.child("q"), dof, 1.0);

    if (sc.mode == LoopMode::nodelay) {
        if (doc.child("proxy_gains").defined()) {
            doc.child("proxy_gains").fail("only used in delayed mode");
        }
        sc.gains = io_detail::parse_gains(doc.required("gains"), dof, c_mode);
    } else {
        if (doc.child("gains").defined()) {
            doc.child("gains").fail("delayed mode takes proxy_gains (robot gains under proxy_gains.robot)");
        }
        const Node pg = doc.required("proxy_gains");
        pg.only({"m_hat", "k_hat", "d_hat", "p_hat", "sigma_hat", "robot"});
        sc.proxy_gains.m_hat = pg.required("m_hat").vector(dof);
        sc.proxy_gains.k_hat = pg.required("k_hat").vector(dof);
        sc.proxy_gains.d_hat = pg.required("d_hat").vector(dof);
        sc.proxy_gains.p_hat = pg.required("p_hat").vector(dof);
        sc.proxy_gains.sigma_hat = pg.required("sigma_hat").number();
        sc.proxy_gains.robot = io_detail::parse_gains(pg.required("robot"), dof, c_mode);

        const Node dl = doc.child("delay");
        dl.only({"master", "slave"});
        sc.delay.master = io_detail::parse_delay(dl.child("master"), tp.d_bar.master,
                                                 presets::derive_seed(sc.seed, 0));
        sc.delay.slave = io_detail::parse_delay(dl.child("slave"), tp.d_bar.slave,
                                                presets::derive_seed(sc.seed, 1));
        for (Side s : kSides) {
            if (sc.delay[s].d_bar > tp.d_bar[s] + 1e-12) {
                dl.child(std::string(to_string(s))).fail("delay bound exceeds theorem.d_bar");
            }
        }
    }

    const Node tq = doc.child("torque");
    tq.only({"master", "slave"});
    sc.torque = {io_detail::parse_torque(tq.child("master"), dof),
                 io_detail::parse_torque(tq.child("slave"), dof)};

    const Node init = doc.child("initial");
    init.only({"master", "slave"});
    sc.initial = {io_detail::parse_state(init.child("master"), dof),
                  io_detail::parse_state(init.child("slave"), dof)};
    const Node initp = doc.child("initial_proxy");
    if (initp.defined()) {
        initp.only({"master", "slave"});
        sc.initial_proxy = SidePair<RobotState>{io_detail::parse_state(initp.child("master"), dof),
                                                io_detail::parse_state(initp.child("slave"), dof)};
    }

    const Node bounds = doc.child("bounds");
    if (bounds.defined()) {
        bounds.only({"master", "slave"});
        sc.bounds = SidePair<BoundConstants>{io_detail::parse_bound(bounds.required("master")),
                                             io_detail::parse_bound(bounds.required("slave"))};
    }

    if (c_mode.automatic) {
        const auto b = scenario_bounds(sc);
        const double c = std::max(b.master.c, b.slave.c);
        (sc.mode == LoopMode::nodelay ? sc.gains : sc.proxy_gains.robot).c = c;
    }
    try {
        sc.validate();
    } catch (const InputError& e) {
        throw ConfigError(source, 0, "", e.what());
    }
    return sc;
}

inline Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path, 0, "", "cannot open file");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

// ---------------------------------------------------------------------------
// Trace output

/// 17 significant digits, which round-trips every double. Negative zero is
/// written as 0.
inline std::string format_double(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x == 0.0 ? 0.0 : x);
    return buf;
}

/// Column names in output order.
inline std::vector<std::string> trace_columns(LoopMode mode, Eigen::Index dof)
{
    std::vector<std::string> cols{"t"};
    auto block = [&](const std::string& prefix) {
        for (Eigen::Index k = 1; k <= dof; ++k) {
            cols.push_back(prefix + "_" + std::to_string(k));
        }
    };
    for (const char* side : {"m", "s"}) {
        block(std::string("q") + side);
        block(std::string("qd") + side);
    }
    if (mode == LoopMode::delayed) {
        for (const char* side : {"m", "s"}) {
            block(std::string("qh") + side);
            block(std::string("qhd") + side);
        }
    }
    block("tau_m");
    block("tau_s");
    block("tau_h");
    block("tau_e");
    for (const char* c : {"d_m", "d_s", "V", "V1", "V2", "e_norm"}) {
        cols.emplace_back(c);
    }
    return cols;
}

inline void write_trace_csv(std::ostream& os, const SimulationTrace& trace)
{
    const auto cols = trace_columns(trace.meta.mode, trace.meta.dof);
    for (std::size_t k = 0; k < cols.size(); ++k) {
        os << (k ? "," : "") << cols[k];
    }
    os << "\n";
    std::string line;
    auto put = [&](double x) {
        line += ',';
        line += format_double(x);
    };
    auto put_vec = [&](const Vector& v) {
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            put(v(k));
        }
    };
    const bool delayed = trace.meta.mode == LoopMode::delayed;
    for (const auto& smp : trace.samples) {
        line = format_double(smp.t);
        for (Side s : kSides) {
            put_vec(smp.robot[s].q);
            put_vec(smp.robot[s].qdot);
        }
        if (delayed) {
            for (Side s : kSides) {
                put_vec(smp.proxy[s].q);
                put_vec(smp.proxy[s].qdot);
            }
        }
        put_vec(smp.tau.master);
        put_vec(smp.tau.slave);
        put_vec(smp.tau_h);
        put_vec(smp.tau_e);
        put(smp.delay.master);
        put(smp.delay.slave);
        put(smp.V);
        put(smp.V1);
        put(smp.V2);
        put(smp.e_norm);
        line += '\n';
        os << line;
    }
}

inline nlohmann::json to_json(const BoundConstants& b)
{
    return {{"lambda1", b.lambda1}, {"lambda2", b.lambda2}, {"c", b.c}};
}

/// Metadata sidecar: scenario identity, seeds, step size, bounds and certificate.
inline nlohmann::json trace_metadata(const SimulationTrace& trace)
{
    const auto& m = trace.meta;
    nlohmann::json j;
    j["scenario"] = m.scenario_id;
    j["mode"] = to_string(m.mode);
    j["dof"] = m.dof;
    j["step"] = m.step;
    j["duration"] = m.duration;
    j["samples"] = trace.samples.size();
    j["seed"] = m.seed;
    j["delay"] = {{"master", {{"kind", m.delay_kinds.master}, {"seed", m.delay_seeds.master}}},
                  {"slave", {{"kind", m.delay_kinds.slave}, {"seed", m.delay_seeds.slave}}}};
    j["tau_bar"] = m.tau_bar;
    j["V0"] = trace.V0();
    j["bounds"] = {{"master", to_json(m.bounds.master)}, {"slave", to_json(m.bounds.slave)}};
    j["certificate"] = to_json(m.certificate);
    j["columns"] = trace_columns(m.mode, m.dof);
    if (trace.divergence) {
        j["divergence"] = {{"t", trace.divergence->t}, {"state_norm", trace.divergence->state_norm}};
    } else {
        j["divergence"] = nullptr;
    }
    return j;
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write '" + path + "'");
    }
    out << text;
    if (!out) {
        throw InputError("write to '" + path + "' failed");
    }
}

/// Writes <dir>/<stem>.csv and <dir>/<stem>.json (metadata, plus the analysis
/// report when given).
inline void write_trace_files(const std::string& dir, const std::string& stem,
                              const SimulationTrace& trace, const SetReport* report = nullptr)
{
    std::ostringstream csv;
    write_trace_csv(csv, trace);
    write_text(dir + "/" + stem + ".csv", csv.str());
    nlohmann::json meta = trace_metadata(trace);
    if (report != nullptr) {
        meta["analysis"] = to_json(*report);
    }
    write_text(dir + "/" + stem + ".json", meta.dump(2) + "\n");
}

} // namespace teleop
