// ct-lab: critical-threshold laboratory for hyperbolic balance-law systems.
//
// Subcommands: threshold-report, simulate, phase-diagram, verify-closed-form.
// Exit codes: 0 success, 2 validation error, 3 indeterminate cells under --strict.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctlab/config.hpp"
#include "ctlab/harness.hpp"

using namespace ctlab;

namespace {

harness::ExperimentConfig load(const std::string& config_path, const std::string& out_override,
                               bool strict, const std::string& system_override = "") {
    const config::Config cfg = config::Config::parse_file(config_path);
    harness::ExperimentConfig ec = harness::ExperimentConfig::from_config(cfg, system_override);
    if (!out_override.empty()) ec.out_dir = out_override;
    ec.strict = strict;
    return ec;
}

void print_files(const std::vector<std::string>& files) {
    for (const auto& f : files) std::cout << "wrote " << f << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ct-lab: critical thresholds for hyperbolic balance-law systems"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    int jobs = 1;
    bool strict = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config file")->required();
        cmd->add_option("--out", out_dir, "output directory override");
        cmd->add_option("--jobs", jobs, "worker threads for sweeps");
        cmd->add_flag("--strict", strict, "exit 3 on any indeterminate outcome");
    };

    CLI::App* report = app.add_subcommand("threshold-report", "evaluate threshold formulas");
    std::string system_override;
    report->add_option("--system", system_override,
                       "override the config's system (ep|epa|ea|relax-nonlocal|relax-local)");
    CLI::App* simulate = app.add_subcommand("simulate", "run one simulation");
    CLI::App* phase = app.add_subcommand("phase-diagram", "sweep and classify cells");
    CLI::App* verify = app.add_subcommand("verify-closed-form", "integrator convergence table");
    std::vector<double> dts = {1e-2, 5e-3, 2.5e-3};
    verify->add_option("--dt", dts, "time steps to test");
    for (CLI::App* cmd : {report, simulate, phase, verify}) add_common(cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (report->parsed()) {
            print_files(harness::write_threshold_report(
                load(config_path, out_dir, strict, system_override)));
            return 0;
        }
        if (simulate->parsed()) {
            const harness::ExperimentConfig ec = load(config_path, out_dir, strict);
            const harness::RunArtifacts art = harness::run(ec);
            print_files(art.files);
            std::cout << "outcome: " << detectors::outcome_name(art.outcome.kind)
                      << " (theoretical: " << thresholds::verdict_name(art.theoretical)
                      << ")\n";
            if (ec.strict && art.outcome.kind == detectors::OutcomeKind::Indeterminate)
                return 3;
            return 0;
        }
        if (phase->parsed()) {
            const harness::ExperimentConfig ec = load(config_path, out_dir, strict);
            const harness::PhaseDiagram pd = harness::phase_diagram(ec, jobs);
            print_files(harness::write_phase_diagram(ec, pd));
            std::cout << "cells " << pd.cells.size() << ", comparable " << pd.comparable
                      << ", disagreements " << pd.disagreements << " (off-boundary "
                      << pd.off_boundary_disagreements << "), indeterminate "
                      << pd.indeterminate << "\n";
            if (ec.strict && pd.indeterminate > 0) return 3;
            return 0;
        }
        if (verify->parsed()) {
            const harness::ExperimentConfig ec = load(config_path, out_dir, strict);
            const harness::ConvergenceTable table = harness::verify_closed_form(ec, dts);
            print_files(harness::write_convergence(ec, table));
            std::printf("%-12s %-14s %-8s\n", "dt", "error", "order");
            for (const auto& row : table.rows) {
                if (row.flagged)
                    std::printf("%-12g %-14s %-8s  %s\n", row.dt, "-", "-", row.note.c_str());
                else
                    std::printf("%-12g %-14.6e %-8.3f\n", row.dt, row.error, row.order);
            }
            std::printf("observed order: %.3f\n", table.observed_order);
            return 0;
        }
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
