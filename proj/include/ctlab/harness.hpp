#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctlab/characteristics.hpp"
#include "ctlab/config.hpp"
#include "ctlab/detectors.hpp"
#include "ctlab/eulerian.hpp"
#include "ctlab/families.hpp"
#include "ctlab/thresholds.hpp"

namespace ctlab::harness {

enum class SystemKind { EP, EPA, EA, RelaxNonlocal, RelaxLocal };
enum class SolverKind { Characteristic, Grid, Particle };

const char* system_name(SystemKind s);
const char* solver_name(SolverKind s);

struct KernelSpec {
    std::string name;                      // constant|tophat|triangle|cosine|exp|power|csv
                                           // relax: gaussian|exp|tophat
    std::map<std::string, double> params;  // height, half_width, offset, amplitude, rate,
                                           // exponent, sigma, support_radius
    std::string flavor = "bounded";        // bounded | l1
    std::string csv_path;

    double get(const std::string& key, double fallback) const {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }
};

struct LawSpec {
    std::string name = "linear-u";  // linear-u | linear-rho-u
    double a = -1.0;                // u coefficient
    double b = 0.0;                 // constant
    double ar = 0.0;                // rho coefficient (linear-rho-u)
};

struct Axis {
    std::string param;
    double min = 0.0, max = 0.0;
    int count = 1;

    double value(int idx) const { return min + (idx + 0.5) * (max - min) / count; }
};

struct ExperimentConfig {
    SystemKind system = SystemKind::EP;
    SolverKind solver = SolverKind::Characteristic;
    double k = 0.0;
    double c = 1.0;
    double horizon = 1.0;
    int snapshots = 50;
    std::uint64_t seed = 1;

    KernelSpec kernel;
    bool has_kernel = false;
    LawSpec law;

    int grid_n = 512;
    int particles = 512;
    double half_length = 10.0;
    double cfl = 0.4;
    double dt = 1e-3;      // fixed step for characteristic/particle runs
    double dt_max = 1e30;  // cap for field solvers

    families::FamilySpec initial;

    std::string out_dir = "out";
    std::string prefix = "run";

    std::vector<Axis> axes;       // at most 2
    double boundary_band = 0.05;  // half-width for boundary-disagreement stats
    bool strict = false;

    // system_override replaces [system] type when nonempty (threshold-report
    // exposes it as --system)
    static ExperimentConfig from_config(const config::Config& cfg,
                                        const std::string& system_override = "");
};

kernels::InfluenceKernel build_alignment_kernel(const KernelSpec& spec, int n);
kernels::RelaxKernel build_relax_kernel(const KernelSpec& spec);
eulerian::VelocityLaw build_law(const LawSpec& spec);

// In-memory result of one simulation (no file IO).
struct SingleRun {
    detectors::RunOutcome outcome;
    thresholds::Verdict theoretical = thresholds::Verdict::Unclassified;
    double min_e0 = 0.0;  // relax systems: min of u0x + rho0

    std::optional<eulerian::FieldTimeline> field;
    std::optional<characteristics::EnsembleTrajectory> ensemble;
    std::vector<characteristics::CharTrajectory> chars;  // EP: one per label
    std::vector<double> char_alphas;
};

SingleRun execute(const ExperimentConfig& ec);

struct RunArtifacts {
    std::vector<std::string> files;
    detectors::RunOutcome outcome;
    thresholds::Verdict theoretical = thresholds::Verdict::Unclassified;
};

// simulate: execute + write trajectory/snapshot CSVs, outcome ledger and
// manifest.
RunArtifacts run(const ExperimentConfig& ec);

// threshold-report
thresholds::ThresholdReport make_threshold_report(const ExperimentConfig& ec);
std::vector<std::string> write_threshold_report(const ExperimentConfig& ec);

// phase-diagram
struct PhaseCell {
    int i = 0, j = 0;
    double a = 0.0, b = 0.0;
    detectors::OutcomeKind empirical = detectors::OutcomeKind::Indeterminate;
    thresholds::Verdict theoretical = thresholds::Verdict::Unclassified;
    double t_c = 0.0;
    double quality = 0.0;
    double min_e0 = 0.0;
    bool crashed = false;
};

struct PhaseDiagram {
    Axis axis1, axis2;
    std::vector<PhaseCell> cells;  // index = j * axis1.count + i
    int comparable = 0;            // cells with a definite theoretical verdict
    int disagreements = 0;
    int off_boundary_disagreements = 0;
    int indeterminate = 0;
};

PhaseDiagram phase_diagram(const ExperimentConfig& ec, int jobs);
std::vector<std::string> write_phase_diagram(const ExperimentConfig& ec, const PhaseDiagram& pd);

// verify-closed-form
struct ConvergenceRow {
    double dt = 0.0;
    double error = 0.0;
    double order = 0.0;  // vs previous row
    bool flagged = false;
    std::string note;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    double observed_order = 0.0;
};

ConvergenceTable verify_closed_form(const ExperimentConfig& ec, const std::vector<double>& dts);
std::vector<std::string> write_convergence(const ExperimentConfig& ec,
                                           const ConvergenceTable& table);

// deterministic float formatting used by every writer
std::string fmt(double v);

}  // namespace ctlab::harness
