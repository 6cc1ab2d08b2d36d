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

// teleop_iss: certify gains, simulate scenarios and run experiment suites.
//
// Exit codes:
//   0  pass
//   1  certificate or analysis check failed
//   2  scenario or command-line error
//   3  simulation diverged

#include "teleop/analysis.hpp"
#include "teleop/io.hpp"
#include "teleop/simulator.hpp"
#include "teleop/suite.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

enum Exit : int { kPass = 0, kFail = 1, kInputError = 2, kDiverged = 3 };

struct Options {
    std::string scenario;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string suite;
    bool skip_analysis = false;
};

teleop::Scenario load(const Options& opt)
{
    teleop::Scenario sc = teleop::load_scenario(opt.scenario);
    if (opt.seed) {
        teleop::apply_seed(sc, *opt.seed);
    }
    return sc;
}

void ensure_dir(const std::string& dir)
{
    if (!dir.empty()) {
        std::filesystem::create_directories(dir);
    }
}

int cmd_certify(const Options& opt)
{
    const teleop::Scenario sc = load(opt);
    const auto bounds = teleop::scenario_bounds(sc);
    const teleop::Certificate cert = teleop::certify(sc, bounds);
    const std::string text = teleop::render_report(cert);
    std::cout << text;
    if (!opt.out.empty()) {
        ensure_dir(opt.out);
        nlohmann::json j = teleop::to_json(cert);
        j["scenario"] = sc.id;
        j["bounds"] = {{"master", teleop::to_json(bounds.master)}, {"slave", teleop::to_json(bounds.slave)}};
        teleop::write_text(opt.out + "/" + sc.id + ".certificate.json", j.dump(2) + "\n");
        teleop::write_text(opt.out + "/" + sc.id + ".certificate.txt", text);
    }
    if (!cert.pass) {
        for (const auto& v : cert.violations()) {
            std::cerr << "violated: " << v.name << " (" << v.scope << "), margin " << v.margin << "\n";
        }
    }
    return cert.pass ? kPass : kFail;
}

int cmd_run(const Options& opt)
{
    const teleop::Scenario sc = load(opt);
    const std::string out = opt.out.empty() ? "." : opt.out;
    ensure_dir(out);
    const teleop::SimulationTrace trace = teleop::run(sc);
    const teleop::Certificate& cert = trace.meta.certificate;
    std::cout << teleop::render_report(cert);

    std::optional<teleop::SetReport> report;
    if (!opt.skip_analysis) {
        report = teleop::analyze(trace);
        std::cout << teleop::render_report(*report);
        teleop::write_text(out + "/" + sc.id + ".report.txt",
                           teleop::render_report(cert) + teleop::render_report(*report));
    }
    teleop::write_trace_files(out, sc.id, trace, report ? &*report : nullptr);

    if (trace.divergence) {
        std::cerr << "diverged at t = " << trace.divergence->t << " s (|x| = "
                  << trace.divergence->state_norm << ")\n";
        return kDiverged;
    }
    if (!cert.pass) {
        std::cerr << "gains are not certified; bounds are not guaranteed\n";
        return kFail;
    }
    return report && !report->pass() ? kFail : kPass;
}

int cmd_suite(const Options& opt)
{
    teleop::SuiteOptions so;
    so.seed = opt.seed.value_or(1);
    so.out_dir = opt.out.empty() ? "suite-" + opt.suite : opt.out;
    so.workers = teleop::worker_count();
    const teleop::SuiteResult result = teleop::run_suite(opt.suite, so);
    std::cout << teleop::summary_table(result);
    return result.ok() ? kPass : kFail;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Certify, simulate and analyze bilateral teleoperation controllers"};
    app.require_subcommand(1);
    Options opt;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option_function<std::uint64_t>(
               "--seed", [&](const std::uint64_t& s) { opt.seed = s; }, "Seed override for random delays")
            ->type_name("<u64>");
    };

    CLI::App* certify = app.add_subcommand("certify", "Check the stability conditions of a scenario's gains");
    certify->add_option("--scenario", opt.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    certify->add_option("--out", opt.out, "Directory for the certificate report");
    add_seed(certify);

    CLI::App* run = app.add_subcommand("run", "Simulate a scenario and analyze the trace");
    run->add_option("--scenario", opt.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", opt.out, "Output directory (default: current directory)");
    run->add_flag("--skip-analysis", opt.skip_analysis, "Write the trace only");
    add_seed(run);

    CLI::App* suite = app.add_subcommand("suite", "Run a predefined scenario matrix");
    suite->add_option("--suite,name", opt.suite, "acceptance | sweep-delay | sweep-gains")
        ->required()
        ->check(CLI::IsMember(teleop::suite_names()));
    suite->add_option("--out", opt.out, "Output directory (default: suite-<name>)");
    add_seed(suite);
    suite->footer(std::string("Worker threads: ") + teleop::kWorkersEnv + " (default: all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kInputError;
    }

    try {
        if (certify->parsed()) return cmd_certify(opt);
        if (run->parsed()) return cmd_run(opt);
        return cmd_suite(opt);
    } catch (const teleop::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFail;
    }
}
