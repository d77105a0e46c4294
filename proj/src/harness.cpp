#include "ctlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ctlab/fft.hpp"

namespace ctlab::harness {

namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* system_name(SystemKind s) {
    switch (s) {
        case SystemKind::EP: return "ep";
        case SystemKind::EPA: return "epa";
        case SystemKind::EA: return "ea";
        case SystemKind::RelaxNonlocal: return "relax-nonlocal";
        case SystemKind::RelaxLocal: return "relax-local";
    }
    return "?";
}

const char* solver_name(SolverKind s) {
    switch (s) {
        case SolverKind::Characteristic: return "characteristic";
        case SolverKind::Grid: return "grid";
        case SolverKind::Particle: return "particle";
    }
    return "?";
}

// --- config translation ----------------------------------------------------

namespace {

SystemKind parse_system(const std::string& s) {
    if (s == "ep") return SystemKind::EP;
    if (s == "epa") return SystemKind::EPA;
    if (s == "ea") return SystemKind::EA;
    if (s == "relax-nonlocal") return SystemKind::RelaxNonlocal;
    if (s == "relax-local") return SystemKind::RelaxLocal;
    throw config::ConfigError("unknown system type: " + s, 0);
}

SolverKind parse_solver(const std::string& s) {
    if (s == "characteristic") return SolverKind::Characteristic;
    if (s == "grid") return SolverKind::Grid;
    if (s == "particle") return SolverKind::Particle;
    throw config::ConfigError("unknown solver: " + s, 0);
}

Axis parse_axis(const std::string& value) {
    // "param,min,max,count"
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : value) {
        if (ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else if (ch != ' ' && ch != '\t') {
            cur += ch;
        }
    }
    parts.push_back(cur);
    if (parts.size() != 4) throw config::ConfigError("axis must be 'param,min,max,count'", 0);
    Axis a;
    a.param = parts[0];
    a.min = std::strtod(parts[1].c_str(), nullptr);
    a.max = std::strtod(parts[2].c_str(), nullptr);
    a.count = static_cast<int>(std::strtol(parts[3].c_str(), nullptr, 10));
    if (a.count < 1) throw config::ConfigError("axis count must be >= 1", 0);
    return a;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const config::Config& cfg,
                                               const std::string& system_override) {
    for (const char* required : {"system", "grid", "initial", "output"})
        if (!cfg.has_section(required))
            throw config::ConfigError(std::string("missing required section [") + required + "]", 0);

    ExperimentConfig ec;
    ec.system = parse_system(system_override.empty() ? cfg.get("system", "type")
                                                     : system_override);

    const char* default_solver =
        ec.system == SystemKind::EP
            ? "characteristic"
            : (ec.system == SystemKind::RelaxNonlocal || ec.system == SystemKind::RelaxLocal
                   ? "grid"
                   : "grid");
    ec.solver = parse_solver(cfg.get_or("system", "solver", default_solver));
    ec.k = cfg.get_double_or("system", "k", 0.0);
    ec.c = cfg.get_double_or("system", "c", 1.0);
    ec.horizon = cfg.get_double("system", "horizon");
    ec.snapshots = static_cast<int>(cfg.get_int_or("system", "snapshots", 50));
    ec.seed = static_cast<std::uint64_t>(cfg.get_int_or("system", "seed", 1));

    if (ec.system == SystemKind::EP && ec.solver != SolverKind::Characteristic)
        throw config::ConfigError("system ep supports only solver = characteristic", 0);
    if (ec.system == SystemKind::EA && ec.k != 0.0)
        throw config::ConfigError("system ea requires k = 0", 0);
    if ((ec.system == SystemKind::RelaxNonlocal || ec.system == SystemKind::RelaxLocal) &&
        ec.solver != SolverKind::Grid)
        throw config::ConfigError("relaxation systems support only solver = grid", 0);
    if (ec.horizon < 0.0) throw config::ConfigError("horizon must be nonnegative", 0);
    if (ec.snapshots < 2) throw config::ConfigError("snapshots must be >= 2", 0);
    if (ec.c <= 0.0) throw config::ConfigError("background c must be positive", 0);

    if (cfg.has_section("kernel")) {
        ec.has_kernel = true;
        ec.kernel.name = cfg.get("kernel", "name");
        ec.kernel.flavor = cfg.get_or("kernel", "flavor", "bounded");
        ec.kernel.csv_path = cfg.get_or("kernel", "path", "");
        for (const auto& [key, value] : cfg.section_items("kernel")) {
            if (key == "name" || key == "flavor" || key == "path") continue;
            char* end = nullptr;
            const double d = std::strtod(value.c_str(), &end);
            if (end == value.c_str() || *end != '\0')
                throw config::ConfigError("kernel parameter '" + key + "' is not a number", 0);
            ec.kernel.params[key] = d;
        }
    }
    const bool needs_kernel = ec.system == SystemKind::EPA || ec.system == SystemKind::EA ||
                              ec.system == SystemKind::RelaxNonlocal;
    if (needs_kernel && !ec.has_kernel)
        throw config::ConfigError("this system requires a [kernel] section", 0);

    if (ec.system == SystemKind::RelaxLocal) {
        ec.law.name = cfg.get_or("system", "f", "linear-u");
        ec.law.a = cfg.get_double_or("system", "f_a", -1.0);
        ec.law.b = cfg.get_double_or("system", "f_b", 0.0);
        ec.law.ar = cfg.get_double_or("system", "f_ar", 0.0);
        if (ec.law.name != "linear-u" && ec.law.name != "linear-rho-u")
            throw config::ConfigError("unknown velocity law: " + ec.law.name, 0);
    }

    const bool line_system =
        ec.system == SystemKind::RelaxNonlocal || ec.system == SystemKind::RelaxLocal;
    ec.grid_n = static_cast<int>(cfg.get_int_or("grid", "n", line_system ? 1024 : 512));
    ec.particles = static_cast<int>(cfg.get_int_or("grid", "particles", ec.grid_n));
    ec.half_length = cfg.get_double_or("grid", "half_length", 10.0);
    ec.cfl = cfg.get_double_or("grid", "cfl", 0.4);
    ec.dt = cfg.get_double_or("grid", "dt", 1e-3);
    ec.dt_max = cfg.get_double_or("grid", "dt_max", 1e30);
    if (ec.grid_n < 8 || ec.grid_n % 2 != 0)
        throw config::ConfigError("grid n must be even and >= 8", 0);
    if (ec.dt <= 0.0) throw config::ConfigError("dt must be positive", 0);

    ec.initial.name = cfg.get("initial", "family");
    ec.initial.seed = ec.seed;
    for (const auto& [key, value] : cfg.section_items("initial")) {
        if (key == "family") continue;
        char* end = nullptr;
        const double d = std::strtod(value.c_str(), &end);
        if (end == value.c_str() || *end != '\0')
            throw config::ConfigError("initial parameter '" + key + "' is not a number", 0);
        ec.initial.params[key] = d;
    }

    ec.out_dir = cfg.get_or("output", "dir", "out");
    ec.prefix = cfg.get_or("output", "prefix", "run");

    if (cfg.has_section("sweep")) {
        if (cfg.has("sweep", "axis1")) ec.axes.push_back(parse_axis(cfg.get("sweep", "axis1")));
        if (cfg.has("sweep", "axis2")) ec.axes.push_back(parse_axis(cfg.get("sweep", "axis2")));
        if (ec.axes.empty()) throw config::ConfigError("[sweep] present but no axis1", 0);
        ec.boundary_band = cfg.get_double_or("sweep", "band", 0.05);
        for (const auto& ax : ec.axes)
            if (!ec.initial.has(ax.param))
                throw config::ConfigError(
                    "sweep axis parameter '" + ax.param + "' is not set in [initial]", 0);
    }
    return ec;
}

kernels::InfluenceKernel build_alignment_kernel(const KernelSpec& spec, int n) {
    kernels::BoundedKernel b;
    if (spec.name == "constant") {
        b = kernels::constant_kernel(spec.get("value", 1.0), n);
    } else if (spec.name == "tophat") {
        b = kernels::tophat_kernel(spec.get("height", 1.0), spec.get("half_width", 0.25), n);
    } else if (spec.name == "triangle") {
        b = kernels::triangle_kernel(spec.get("height", 1.0), spec.get("half_width", 0.25), n);
    } else if (spec.name == "cosine") {
        b = kernels::cosine_kernel(spec.get("offset", 1.0), spec.get("amplitude", 0.5), n);
    } else if (spec.name == "exp") {
        b = kernels::exponential_kernel(spec.get("amplitude", 1.0), spec.get("rate", 4.0), n);
    } else if (spec.name == "power" || spec.name == "power-singular") {
        return kernels::power_singular_kernel(spec.get("amplitude", 0.25),
                                              spec.get("exponent", 0.5), n);
    } else if (spec.name == "csv" || spec.name == "tabulated") {
        std::ifstream in(spec.csv_path);
        if (!in) throw std::invalid_argument("cannot open kernel csv: " + spec.csv_path);
        std::vector<double> samples;
        std::string tok;
        while (std::getline(in, tok, ',')) {
            std::istringstream ss(tok);
            double v;
            while (ss >> v) samples.push_back(v);
        }
        if (static_cast<int>(samples.size()) != n)
            throw std::invalid_argument("kernel csv sample count must match the grid");
        b = kernels::tabulated_kernel(samples);
    } else {
        throw std::invalid_argument("unknown alignment kernel: " + spec.name);
    }
    if (spec.flavor == "l1") return kernels::as_l1(b);
    return b;
}

kernels::RelaxKernel build_relax_kernel(const KernelSpec& spec) {
    const double radius = spec.get("support_radius", 5.0);
    if (spec.name == "gaussian") return kernels::gaussian_relax_kernel(spec.get("sigma", 0.5), radius);
    if (spec.name == "exp") return kernels::exponential_relax_kernel(radius);
    if (spec.name == "tophat") return kernels::tophat_relax_kernel(spec.get("half_width", 1.0));
    throw std::invalid_argument("unknown relaxation kernel: " + spec.name);
}

eulerian::VelocityLaw build_law(const LawSpec& spec) {
    if (spec.name == "linear-u") return eulerian::linear_u_law(spec.a, spec.b);
    return eulerian::linear_rho_u_law(spec.ar, spec.a, spec.b);
}

// --- execution ---------------------------------------------------------------

namespace {

int verdict_rank(thresholds::Verdict v) {
    switch (v) {
        case thresholds::Verdict::Subcritical: return 0;
        case thresholds::Verdict::Unclassified: return 1;
        case thresholds::Verdict::Critical: return 2;
        case thresholds::Verdict::Supercritical: return 3;
    }
    return 1;
}

thresholds::Verdict worst_verdict(thresholds::Verdict a, thresholds::Verdict b) {
    return verdict_rank(a) >= verdict_rank(b) ? a : b;
}

GridField epa_initial_g(const GridField& rho0, const GridField& u0,
                        const kernels::InfluenceKernel& psi) {
    const std::vector<double> ux = fft::periodic_derivative(u0.values);
    const GridField conv = kernels::periodic_convolve_fast(kernels::kernel_samples(psi), rho0);
    GridField g = GridField::torus(rho0.n);
    for (int i = 0; i < rho0.n; ++i) g[i] = ux[static_cast<size_t>(i)] + conv[i];
    return g;
}

SingleRun execute_ep(const ExperimentConfig& ec) {
    SingleRun r;
    const families::InitialData data = families::build_family(ec.initial, ec.c, nullptr, 0);

    std::vector<std::pair<double, std::pair<double, double>>> labels;  // alpha -> (rho0, g0)
    if (data.is_point) {
        labels.push_back({0.0, {data.point_rho0, data.point_g0}});
    } else {
        GridField grid = GridField::torus(ec.grid_n);
        for (int i = 0; i < ec.grid_n; ++i) {
            const double a = grid.x(i);
            labels.push_back({a, {data.rho0(a), data.u0x(a)}});
        }
    }

    detectors::RunOutcome agg;
    agg.kind = detectors::OutcomeKind::GlobalSmooth;
    agg.horizon = ec.horizon;
    r.theoretical = thresholds::Verdict::Subcritical;  // worst over labels
    bool any_indeterminate = false;
    double best_tc = 1e300;

    for (const auto& [alpha, init] : labels) {
        r.theoretical = worst_verdict(r.theoretical,
                                      thresholds::ep_pointwise(init.second, init.first));
        characteristics::CharTrajectory traj =
            characteristics::integrate_ep(init.first, init.second, ec.horizon, ec.dt);
        const detectors::RunOutcome out = detectors::classify(traj.series, detectors::kStateGuard);
        agg.max_witness = std::max(agg.max_witness, out.max_witness);
        agg.max_ux = std::max(agg.max_ux, out.max_ux);
        agg.min_rho = std::min(agg.min_rho == 0.0 ? out.min_rho : agg.min_rho, out.min_rho);
        agg.max_rho = std::max(agg.max_rho, out.max_rho);
        if (out.kind == detectors::OutcomeKind::Blowup && out.t_c_estimate < best_tc) {
            best_tc = out.t_c_estimate;
            agg.kind = detectors::OutcomeKind::Blowup;
            agg.t_c_estimate = out.t_c_estimate;
            agg.x_c = alpha;
            agg.fit_quality = out.fit_quality;
        } else if (out.kind == detectors::OutcomeKind::Indeterminate) {
            any_indeterminate = true;
            for (const auto& f : out.flags) agg.flags.push_back(f);
        }
        r.char_alphas.push_back(alpha);
        r.chars.push_back(std::move(traj));
    }
    if (agg.kind != detectors::OutcomeKind::Blowup && any_indeterminate)
        agg.kind = detectors::OutcomeKind::Indeterminate;
    r.outcome = agg;
    return r;
}

SingleRun execute_epa(const ExperimentConfig& ec) {
    SingleRun r;
    const kernels::InfluenceKernel psi = build_alignment_kernel(
        ec.kernel, ec.solver == SolverKind::Particle ? ec.particles : ec.grid_n);
    const families::InitialData data =
        families::build_family(ec.initial, ec.c, &psi,
                               ec.solver == SolverKind::Particle ? ec.particles : ec.grid_n);
    thresholds::SystemParams params;
    params.k = ec.k;
    params.c = ec.c;

    if (ec.solver == SolverKind::Grid) {
        GridField rho0 = GridField::torus(ec.grid_n);
        GridField u0 = GridField::torus(ec.grid_n);
        for (int i = 0; i < ec.grid_n; ++i) {
            rho0[i] = data.rho0(rho0.x(i));
            u0[i] = data.u0(u0.x(i));
        }
        if (ec.system == SystemKind::EA)
            r.theoretical = thresholds::ea_global_check(epa_initial_g(rho0, u0, psi));

        eulerian::SolveOptions opt;
        opt.T = ec.horizon;
        opt.cfl = ec.cfl;
        opt.dt_max = ec.dt_max;
        opt.snapshots = ec.snapshots;
        eulerian::FieldTimeline tl = eulerian::solve_epa(rho0, u0, psi, params, opt);
        r.outcome = detectors::classify(tl.series, detectors::kGradientGuard);
        r.field = std::move(tl);
    } else {
        characteristics::EPAEnsemble ens = characteristics::make_epa_ensemble(
            data.rho0, data.u0, data.u0x, psi, ec.k, ec.particles, ec.grid_n, data.g0_override);
        if (ec.system == SystemKind::EA) {
            double gmin = ens.G[0];
            for (double g : ens.G) gmin = std::min(gmin, g);
            r.theoretical = gmin > 0.0 ? thresholds::Verdict::Subcritical
                                       : thresholds::Verdict::Unclassified;
        }
        characteristics::EnsembleOptions opt;
        opt.T = ec.horizon;
        opt.dt = ec.dt;
        opt.snapshots = ec.snapshots;
        characteristics::EnsembleTrajectory traj = characteristics::integrate_epa_ensemble(ens, opt);
        r.outcome = detectors::classify(traj.series, detectors::kStateGuard);
        r.ensemble = std::move(traj);
    }
    return r;
}

SingleRun execute_relax(const ExperimentConfig& ec) {
    SingleRun r;
    const families::InitialData data = families::build_family(ec.initial, ec.c, nullptr, 0);
    GridField rho0 = families::sample_line(data.rho0, ec.grid_n, ec.half_length);
    GridField u0 = families::sample_line(data.u0, ec.grid_n, ec.half_length);

    double min_e0 = 1e300;
    for (int i = 0; i < ec.grid_n; ++i) {
        const double x = rho0.x(i);
        min_e0 = std::min(min_e0, data.u0x(x) + data.rho0(x));
    }
    r.min_e0 = min_e0;
    r.theoretical = min_e0 >= 0.0 ? thresholds::Verdict::Subcritical
                                  : thresholds::Verdict::Supercritical;

    eulerian::SolveOptions opt;
    opt.T = ec.horizon;
    opt.cfl = ec.cfl;
    opt.dt_max = ec.dt_max;
    opt.snapshots = ec.snapshots;

    eulerian::FieldTimeline tl;
    eulerian::VelocityLaw law;
    if (ec.system == SystemKind::RelaxNonlocal) {
        const kernels::RelaxKernel q = build_relax_kernel(ec.kernel);
        tl = eulerian::solve_relax_nonlocal(rho0, u0, q, opt);
    } else {
        law = build_law(ec.law);
        opt.track_density_bound = !law.depends_on_rho;
        tl = eulerian::solve_relax_local(rho0, u0, law, opt);
    }

    // theorem-prescribed checks become classification flags when the
    // hypotheses hold (subcritical data, f_u <= 0, margin intact)
    if (r.theoretical == thresholds::Verdict::Subcritical &&
        tl.series.termination == detectors::Termination::Completed) {
        bool law_ok = true;
        for (const auto& w : tl.warnings)
            if (w.find("velocity law breach") != std::string::npos) law_ok = false;
        if (law_ok) {
            double e0_max = -1e300;
            for (int i = 0; i < ec.grid_n; ++i) {
                const double x = rho0.x(i);
                e0_max = std::max(e0_max, data.u0x(x) + data.rho0(x));
            }
            const double M = std::max(rho0.max(), e0_max);
            const double tol = 1e-6 * (1.0 + std::abs(M));
            const auto erange =
                detectors::check_e_range(tl.snap_t, tl.e_min, tl.e_max, 0.0, M, tol);
            if (!erange.satisfied)
                tl.series.bound_violations.push_back(
                    "e-range violated: margin " + fmt(erange.worst_margin) + " at t=" +
                    fmt(erange.worst_t));
            if (!tl.density_ratio_global.empty()) {
                const auto dens = detectors::check_density_bound(
                    tl.snap_t, tl.density_ratio_global,
                    std::vector<double>(tl.snap_t.size(), 1.0), 0.05);
                if (!dens.satisfied)
                    tl.series.bound_violations.push_back(
                        "density bound exceeded by " + fmt(dens.worst_margin) + " at t=" +
                        fmt(dens.worst_t));
            }
        }
    }

    r.outcome = detectors::classify(tl.series, detectors::kGradientGuard);
    r.field = std::move(tl);
    return r;
}

}  // namespace

SingleRun execute(const ExperimentConfig& ec) {
    switch (ec.system) {
        case SystemKind::EP: return execute_ep(ec);
        case SystemKind::EPA:
        case SystemKind::EA: return execute_epa(ec);
        case SystemKind::RelaxNonlocal:
        case SystemKind::RelaxLocal: return execute_relax(ec);
    }
    throw std::logic_error("unreachable");
}

// --- writers -----------------------------------------------------------------

namespace {

using Section = std::pair<std::string, std::vector<std::pair<std::string, std::string>>>;

void write_manifest(const std::string& path, const std::vector<Section>& sections) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& [name, items] : sections) {
        out << "[" << name << "]\n";
        for (const auto& [k, v] : items) out << k << " = " << v << "\n";
        out << "\n";
    }
}

std::string join_flags(const std::vector<std::string>& flags) {
    std::string s;
    for (size_t i = 0; i < flags.size(); ++i) {
        if (i) s += "; ";
        s += flags[i];
    }
    return s.empty() ? "none" : s;
}

void write_outcome_csv(const std::string& path, const std::string& run_id,
                       const detectors::RunOutcome& out) {
    std::ofstream f(path, std::ios::binary);
    f << "run_id,kind,t_c,x_c,quality,bound_flags\n";
    f << run_id << "," << detectors::outcome_name(out.kind) << ","
      << fmt(out.kind == detectors::OutcomeKind::Blowup ? out.t_c_estimate : 0.0) << ","
      << fmt(out.x_c.value_or(0.0)) << "," << fmt(out.fit_quality) << ",\""
      << join_flags(out.flags) << "\"\n";
}

std::vector<Section> base_manifest(const ExperimentConfig& ec, const SingleRun& r) {
    std::vector<Section> m;
    Section run{"run", {}};
    run.second.push_back({"system", system_name(ec.system)});
    run.second.push_back({"solver", solver_name(ec.solver)});
    run.second.push_back({"family", ec.initial.name});
    run.second.push_back({"horizon", fmt(ec.horizon)});
    run.second.push_back({"seed", std::to_string(ec.seed)});
    m.push_back(run);

    Section params{"params", {}};
    params.second.push_back({"k", fmt(ec.k)});
    params.second.push_back({"c", fmt(ec.c)});
    if (ec.has_kernel) {
        params.second.push_back({"kernel", ec.kernel.name});
        params.second.push_back({"kernel_flavor", ec.kernel.flavor});
        for (const auto& [k, v] : ec.kernel.params)
            params.second.push_back({"kernel_" + k, fmt(v)});
    }
    if (ec.system == SystemKind::RelaxLocal) {
        params.second.push_back({"law", ec.law.name});
        params.second.push_back({"law_a", fmt(ec.law.a)});
        params.second.push_back({"law_b", fmt(ec.law.b)});
        params.second.push_back({"law_ar", fmt(ec.law.ar)});
    }
    for (const auto& [k, v] : ec.initial.params)
        params.second.push_back({"initial_" + k, fmt(v)});
    m.push_back(params);

    Section grid{"grid", {}};
    grid.second.push_back({"n", std::to_string(ec.grid_n)});
    grid.second.push_back({"particles", std::to_string(ec.particles)});
    grid.second.push_back({"half_length", fmt(ec.half_length)});
    grid.second.push_back({"cfl", fmt(ec.cfl)});
    grid.second.push_back({"dt", fmt(ec.dt)});
    grid.second.push_back({"dt_max", fmt(ec.dt_max)});
    grid.second.push_back({"scheme", ec.solver == SolverKind::Grid
                                         ? "llf-minmod-ssprk2"
                                         : "rk4-fixed-step"});
    m.push_back(grid);

    Section outc{"outcome", {}};
    outc.second.push_back({"kind", detectors::outcome_name(r.outcome.kind)});
    outc.second.push_back({"theoretical", thresholds::verdict_name(r.theoretical)});
    outc.second.push_back({"t_c_estimate", fmt(r.outcome.t_c_estimate)});
    outc.second.push_back({"x_c", fmt(r.outcome.x_c.value_or(0.0))});
    outc.second.push_back({"fit_quality", fmt(r.outcome.fit_quality)});
    outc.second.push_back({"max_witness", fmt(r.outcome.max_witness)});
    outc.second.push_back({"max_ux", fmt(r.outcome.max_ux)});
    outc.second.push_back({"min_rho", fmt(r.outcome.min_rho)});
    outc.second.push_back({"max_rho", fmt(r.outcome.max_rho)});
    outc.second.push_back({"flags", join_flags(r.outcome.flags)});
    m.push_back(outc);

    if (r.field) {
        const auto& tl = *r.field;
        Section cons{"conservation", {}};
        cons.second.push_back({"mass_initial", fmt(tl.mass_initial)});
        cons.second.push_back({"mass_final", fmt(tl.mass_final)});
        cons.second.push_back({"boundary_flux_total", fmt(tl.boundary_flux_total)});
        cons.second.push_back({"mass_drift_per_step_max", fmt(tl.mass_drift_per_step_max)});
        m.push_back(cons);

        Section diag{"diagnostics", {}};
        diag.second.push_back({"termination",
                               detectors::termination_name(tl.series.termination)});
        diag.second.push_back({"t_end", fmt(tl.series.t_end)});
        if (!tl.g_residual.empty()) {
            double worst = 0.0;
            for (double v : tl.g_residual) worst = std::max(worst, v);
            diag.second.push_back({"g_relation_residual_max", fmt(worst)});
        }
        if (!tl.hyp_margin.empty()) {
            double worst = 1e300;
            for (double v : tl.hyp_margin) worst = std::min(worst, v);
            diag.second.push_back({"hyperbolicity_margin_min", fmt(worst)});
        }
        if (!tl.e_mismatch.empty()) {
            double worst = 0.0;
            for (double v : tl.e_mismatch) worst = std::max(worst, v);
            diag.second.push_back({"e_consistency_max", fmt(worst)});
        }
        if (!tl.density_ratio_global.empty()) {
            double worst = 0.0;
            for (double v : tl.density_ratio_global) worst = std::max(worst, v);
            diag.second.push_back({"density_bound_ratio_global_max", fmt(worst)});
            worst = 0.0;
            for (double v : tl.density_ratio_local) worst = std::max(worst, v);
            diag.second.push_back({"density_bound_ratio_local_max", fmt(worst)});
        }
        for (size_t i = 0; i < tl.warnings.size(); ++i)
            diag.second.push_back({"warning" + std::to_string(i), tl.warnings[i]});
        m.push_back(diag);
    }
    if (r.ensemble) {
        const auto& tr = *r.ensemble;
        Section cons{"conservation", {}};
        double mass = 0.0;
        for (double v : tr.mass) mass += v;
        cons.second.push_back({"mass", fmt(mass)});
        cons.second.push_back({"momentum_initial", fmt(tr.momentum.front())});
        cons.second.push_back({"momentum_final", fmt(tr.momentum.back())});
        double worst = 0.0;
        for (double v : tr.consistency_residual) worst = std::max(worst, v);
        cons.second.push_back({"consistency_residual_max", fmt(worst)});
        cons.second.push_back({"termination",
                               detectors::termination_name(tr.series.termination)});
        cons.second.push_back({"t_end", fmt(tr.series.t_end)});
        m.push_back(cons);
    }
    return m;
}

void write_series_csv(const std::string& path, const detectors::RunSeries& s) {
    std::ofstream f(path, std::ios::binary);
    f << "t,witness,max_ux,min_rho,max_rho\n";
    for (size_t i = 0; i < s.t.size(); ++i)
        f << fmt(s.t[i]) << "," << fmt(s.witness[i]) << "," << fmt(s.max_ux[i]) << ","
          << fmt(s.min_rho[i]) << "," << fmt(s.max_rho[i]) << "\n";
}

std::string snap_name(const std::string& prefix, int idx) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", idx);
    return prefix + "_snap_" + buf + ".csv";
}

}  // namespace

RunArtifacts run(const ExperimentConfig& ec) {
    SingleRun r = execute(ec);
    fs::create_directories(ec.out_dir);
    std::vector<std::string> files;
    const std::string base = ec.out_dir + "/" + ec.prefix;

    if (!r.chars.empty()) {
        // one trajectory file for the characteristic bundle
        const std::string path = base + "_trajectory.csv";
        std::ofstream f(path, std::ios::binary);
        f << "t,alpha,x,rho,G,u\n";
        for (size_t ci = 0; ci < r.chars.size(); ++ci) {
            const auto& traj = r.chars[ci];
            const double alpha = r.char_alphas[ci];
            const size_t stride =
                std::max<size_t>(1, traj.states.size() / static_cast<size_t>(ec.snapshots));
            for (size_t si = 0; si < traj.states.size(); ++si) {
                if (si % stride != 0 && si + 1 != traj.states.size()) continue;
                const auto& s = traj.states[si];
                f << fmt(s.t) << "," << fmt(alpha) << "," << fmt(alpha) << "," << fmt(s.rho)
                  << "," << fmt(s.g) << "," << fmt(0.0) << "\n";
            }
        }
        files.push_back(path);
        write_series_csv(base + "_series.csv", r.chars.front().series);
        files.push_back(base + "_series.csv");
    }

    if (r.ensemble) {
        const auto& tr = *r.ensemble;
        const std::string path = base + "_trajectory.csv";
        std::ofstream f(path, std::ios::binary);
        f << "t,alpha,x,rho,G,u\n";
        for (const auto& snap : tr.snapshots)
            for (size_t i = 0; i < tr.alpha.size(); ++i)
                f << fmt(snap.t) << "," << fmt(tr.alpha[i]) << "," << fmt(torus_wrap(snap.x[i]))
                  << "," << fmt(snap.rho[i]) << "," << fmt(snap.G[i]) << "," << fmt(snap.u[i])
                  << "\n";
        files.push_back(path);
        write_series_csv(base + "_series.csv", tr.series);
        files.push_back(base + "_series.csv");
    }

    if (r.field) {
        const auto& tl = *r.field;
        for (size_t si = 0; si < tl.snapshots.size(); ++si) {
            const auto& snap = tl.snapshots[si];
            const std::string path = snap_name(base, static_cast<int>(si));
            std::ofstream f(path, std::ios::binary);
            f << "x,rho,u,e,aux\n";
            for (int i = 0; i < snap.rho.n; ++i)
                f << fmt(snap.rho.x(i)) << "," << fmt(snap.rho[i]) << "," << fmt(snap.u[i])
                  << "," << fmt(snap.e_fd[i]) << "," << fmt(snap.aux[i]) << "\n";
            files.push_back(path);
        }
        write_series_csv(base + "_series.csv", tl.series);
        files.push_back(base + "_series.csv");
    }

    write_outcome_csv(base + "_outcome.csv", ec.prefix, r.outcome);
    files.push_back(base + "_outcome.csv");
    write_manifest(base + "_manifest.txt", base_manifest(ec, r));
    files.push_back(base + "_manifest.txt");

    RunArtifacts out;
    out.files = std::move(files);
    out.outcome = std::move(r.outcome);
    out.theoretical = r.theoretical;
    return out;
}

// --- threshold report ----------------------------------------------------------

thresholds::ThresholdReport make_threshold_report(const ExperimentConfig& ec) {
    thresholds::ThresholdReport rep;
    const families::InitialData data = [&] {
        if (ec.system == SystemKind::EPA || ec.system == SystemKind::EA) {
            const kernels::InfluenceKernel psi = build_alignment_kernel(ec.kernel, ec.grid_n);
            return families::build_family(ec.initial, ec.c, &psi, ec.grid_n);
        }
        return families::build_family(ec.initial, ec.c, nullptr, 0);
    }();

    thresholds::SystemParams params;
    params.k = ec.k;
    params.c = ec.c;

    if ((ec.system == SystemKind::EPA) && ec.k > 0.0) {
        const kernels::InfluenceKernel psi = build_alignment_kernel(ec.kernel, ec.grid_n);
        const thresholds::KernelStats stats = thresholds::KernelStats::of(psi);
        rep.regime = thresholds::classify_regime(stats, params);
        rep.lambda = params.lambda();
        rep.z = thresholds::z_params(stats, params);
        rep.admissible = thresholds::admissibility(stats, params, rep.regime.regime);
    }

    const bool line = ec.system == SystemKind::RelaxNonlocal || ec.system == SystemKind::RelaxLocal;
    GridField grid = line ? GridField::line(ec.grid_n, ec.half_length)
                          : GridField::torus(ec.grid_n);

    std::optional<GridField> g0;
    if (ec.system == SystemKind::EA || ec.system == SystemKind::EPA) {
        const kernels::InfluenceKernel psi = build_alignment_kernel(ec.kernel, ec.grid_n);
        GridField rho0 = GridField::torus(ec.grid_n);
        GridField u0 = GridField::torus(ec.grid_n);
        for (int i = 0; i < ec.grid_n; ++i) {
            rho0[i] = data.rho0(rho0.x(i));
            u0[i] = data.u0(u0.x(i));
        }
        g0 = epa_initial_g(rho0, u0, psi);
    }

    for (int i = 0; i < ec.grid_n; ++i) {
        const double x = grid.x(i);
        thresholds::PointVerdict pv;
        pv.x = x;
        switch (ec.system) {
            case SystemKind::EP:
                pv.verdict = data.is_point
                                 ? thresholds::ep_pointwise(data.point_g0, data.point_rho0)
                                 : thresholds::ep_pointwise(data.u0x(x), data.rho0(x));
                break;
            case SystemKind::RelaxNonlocal:
            case SystemKind::RelaxLocal:
                pv.verdict = thresholds::relax_pointwise(data.u0x(x), data.rho0(x));
                break;
            case SystemKind::EA:
                pv.verdict = (*g0)[i] > 0.0 ? thresholds::Verdict::Subcritical
                                            : thresholds::Verdict::Unclassified;
                break;
            case SystemKind::EPA:
                pv.verdict = thresholds::Verdict::Unclassified;
                break;
        }
        rep.pointwise.push_back(pv);
    }
    return rep;
}

namespace {

std::string ztag_str(const thresholds::ZValue& z) {
    switch (z.tag) {
        case thresholds::ZTag::Real: return "real";
        case thresholds::ZTag::Imag: return "imaginary";
        case thresholds::ZTag::Inf: return "infinity";
    }
    return "?";
}

}  // namespace

std::vector<std::string> write_threshold_report(const ExperimentConfig& ec) {
    const thresholds::ThresholdReport rep = make_threshold_report(ec);
    fs::create_directories(ec.out_dir);
    const std::string base = ec.out_dir + "/" + ec.prefix;
    std::vector<std::string> files;

    std::vector<Section> m;
    Section head{"threshold-report", {}};
    head.second.push_back({"system", system_name(ec.system)});
    head.second.push_back({"family", ec.initial.name});
    head.second.push_back({"k", fmt(ec.k)});
    head.second.push_back({"c", fmt(ec.c)});
    m.push_back(head);

    if (ec.system == SystemKind::EPA && ec.k > 0.0) {
        Section reg{"regime", {}};
        reg.second.push_back({"lambda", fmt(rep.lambda)});
        reg.second.push_back({"label", thresholds::regime_name(rep.regime.regime)});
        reg.second.push_back({"strength_lo", fmt(rep.regime.strength_lo)});
        reg.second.push_back({"strength_hi", fmt(rep.regime.strength_hi)});
        m.push_back(reg);

        Section z{"z-parameters", {}};
        z.second.push_back({"z_hat_tag", ztag_str(rep.z.z_hat)});
        z.second.push_back({"z_hat_magnitude", fmt(rep.z.z_hat.magnitude)});
        z.second.push_back({"z_tilde_tag", ztag_str(rep.z.z_tilde)});
        z.second.push_back({"z_tilde_magnitude", fmt(rep.z.z_tilde.magnitude)});
        m.push_back(z);

        Section adm{"admissibility", {}};
        adm.second.push_back({"lhs", fmt(rep.admissible.lhs)});
        adm.second.push_back({"rhs", fmt(rep.admissible.rhs)});
        adm.second.push_back({"admissible", rep.admissible.admissible ? "true" : "false"});
        adm.second.push_back({"evaluable", rep.admissible.evaluable ? "true" : "false"});
        m.push_back(adm);
    }

    Section counts{"verdicts", {}};
    int nsub = 0, ncrit = 0, nsuper = 0, nun = 0;
    for (const auto& pv : rep.pointwise) {
        switch (pv.verdict) {
            case thresholds::Verdict::Subcritical: ++nsub; break;
            case thresholds::Verdict::Critical: ++ncrit; break;
            case thresholds::Verdict::Supercritical: ++nsuper; break;
            case thresholds::Verdict::Unclassified: ++nun; break;
        }
    }
    counts.second.push_back({"points", std::to_string(rep.pointwise.size())});
    counts.second.push_back({"subcritical", std::to_string(nsub)});
    counts.second.push_back({"critical", std::to_string(ncrit)});
    counts.second.push_back({"supercritical", std::to_string(nsuper)});
    counts.second.push_back({"unclassified", std::to_string(nun)});
    m.push_back(counts);

    write_manifest(base + "_threshold.txt", m);
    files.push_back(base + "_threshold.txt");

    std::ofstream csv(base + "_threshold.csv", std::ios::binary);
    csv << "x,verdict\n";
    for (const auto& pv : rep.pointwise)
        csv << fmt(pv.x) << "," << thresholds::verdict_name(pv.verdict) << "\n";
    files.push_back(base + "_threshold.csv");
    return files;
}

// --- phase diagram ---------------------------------------------------------------

PhaseDiagram phase_diagram(const ExperimentConfig& ec, int jobs) {
    if (ec.axes.empty() || ec.axes.size() > 2)
        throw config::ConfigError("phase-diagram needs one or two sweep axes", 0);
    PhaseDiagram pd;
    pd.axis1 = ec.axes[0];
    pd.axis2 = ec.axes.size() > 1 ? ec.axes[1] : Axis{"", 0.0, 0.0, 1};

    const int n1 = pd.axis1.count, n2 = pd.axis2.count;
    pd.cells.assign(static_cast<size_t>(n1) * n2, PhaseCell{});

    std::atomic<int> next{0};
    const int total = n1 * n2;
    auto worker = [&]() {
        for (;;) {
            const int idx = next.fetch_add(1);
            if (idx >= total) return;
            const int i = idx % n1, j = idx / n1;
            PhaseCell cell;
            cell.i = i;
            cell.j = j;
            cell.a = pd.axis1.value(i);
            cell.b = pd.axis2.param.empty() ? 0.0 : pd.axis2.value(j);
            ExperimentConfig cc = ec;
            cc.axes.clear();
            cc.initial.params[pd.axis1.param] = cell.a;
            if (!pd.axis2.param.empty()) cc.initial.params[pd.axis2.param] = cell.b;
            try {
                SingleRun r = execute(cc);
                cell.empirical = r.outcome.kind;
                cell.theoretical = r.theoretical;
                cell.t_c = r.outcome.t_c_estimate;
                cell.quality = r.outcome.fit_quality;
                cell.min_e0 = r.min_e0;
            } catch (const std::exception&) {
                cell.crashed = true;
                cell.empirical = detectors::OutcomeKind::Indeterminate;
            }
            pd.cells[static_cast<size_t>(idx)] = cell;
        }
    };

    const int nw = std::max(1, jobs);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nw - 1));
    for (int w = 1; w < nw; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    for (const auto& cell : pd.cells) {
        if (cell.empirical == detectors::OutcomeKind::Indeterminate) ++pd.indeterminate;
        const bool th_def = cell.theoretical == thresholds::Verdict::Subcritical ||
                            cell.theoretical == thresholds::Verdict::Supercritical;
        const bool emp_def = cell.empirical != detectors::OutcomeKind::Indeterminate;
        if (!th_def || !emp_def) continue;
        ++pd.comparable;
        const bool th_smooth = cell.theoretical == thresholds::Verdict::Subcritical;
        const bool emp_smooth = cell.empirical == detectors::OutcomeKind::GlobalSmooth;
        if (th_smooth != emp_smooth) {
            ++pd.disagreements;
            double dist = 1e300;
            if (ec.system == SystemKind::EP) {
                // distance to the threshold curve g = -sqrt(2 rho)
                auto it = ec.initial.params.find("rho0");
                const double rho0 = pd.axis1.param == "rho0"
                                        ? cell.a
                                        : (pd.axis2.param == "rho0"
                                               ? cell.b
                                               : (it != ec.initial.params.end() ? it->second : 1.0));
                auto ig = ec.initial.params.find("g0");
                const double g0 = pd.axis1.param == "g0"
                                      ? cell.a
                                      : (pd.axis2.param == "g0"
                                             ? cell.b
                                             : (ig != ec.initial.params.end() ? ig->second : 0.0));
                dist = std::abs(g0 + std::sqrt(2.0 * std::max(rho0, 0.0)));
            } else {
                dist = std::abs(cell.min_e0);
            }
            if (dist > ec.boundary_band) ++pd.off_boundary_disagreements;
        }
    }
    return pd;
}

std::vector<std::string> write_phase_diagram(const ExperimentConfig& ec, const PhaseDiagram& pd) {
    fs::create_directories(ec.out_dir);
    const std::string base = ec.out_dir + "/" + ec.prefix;
    std::vector<std::string> files;

    {
        std::ofstream f(base + "_phase.csv", std::ios::binary);
        f << "i,j," << (pd.axis1.param.empty() ? "a" : pd.axis1.param) << ","
          << (pd.axis2.param.empty() ? "b" : pd.axis2.param)
          << ",empirical,theoretical,t_c,quality,min_e0,crashed\n";
        for (const auto& cell : pd.cells)
            f << cell.i << "," << cell.j << "," << fmt(cell.a) << "," << fmt(cell.b) << ","
              << detectors::outcome_name(cell.empirical) << ","
              << thresholds::verdict_name(cell.theoretical) << "," << fmt(cell.t_c) << ","
              << fmt(cell.quality) << "," << fmt(cell.min_e0) << ","
              << (cell.crashed ? 1 : 0) << "\n";
        files.push_back(base + "_phase.csv");
    }
    {
        std::ofstream f(base + "_ledger.csv", std::ios::binary);
        f << "run_id,kind,t_c,x_c,quality,bound_flags\n";
        for (const auto& cell : pd.cells)
            f << cell.i << "_" << cell.j << "," << detectors::outcome_name(cell.empirical) << ","
              << fmt(cell.t_c) << "," << fmt(0.0) << "," << fmt(cell.quality) << ",\""
              << (cell.crashed ? "crashed" : "none") << "\"\n";
        files.push_back(base + "_ledger.csv");
    }
    std::vector<Section> m;
    Section s{"phase-diagram", {}};
    s.second.push_back({"system", system_name(ec.system)});
    s.second.push_back({"axis1", pd.axis1.param + "," + fmt(pd.axis1.min) + "," +
                                     fmt(pd.axis1.max) + "," + std::to_string(pd.axis1.count)});
    if (!pd.axis2.param.empty())
        s.second.push_back({"axis2", pd.axis2.param + "," + fmt(pd.axis2.min) + "," +
                                         fmt(pd.axis2.max) + "," + std::to_string(pd.axis2.count)});
    s.second.push_back({"cells", std::to_string(pd.cells.size())});
    s.second.push_back({"comparable", std::to_string(pd.comparable)});
    s.second.push_back({"disagreements", std::to_string(pd.disagreements)});
    s.second.push_back({"off_boundary_disagreements",
                        std::to_string(pd.off_boundary_disagreements)});
    s.second.push_back({"indeterminate", std::to_string(pd.indeterminate)});
    s.second.push_back({"boundary_band", fmt(ec.boundary_band)});
    m.push_back(s);
    write_manifest(base + "_phase_manifest.txt", m);
    files.push_back(base + "_phase_manifest.txt");
    return files;
}

// --- closed-form verification -----------------------------------------------------

ConvergenceTable verify_closed_form(const ExperimentConfig& ec, const std::vector<double>& dts) {
    ConvergenceTable table;
    const families::InitialData data = families::build_family(ec.initial, ec.c, nullptr, 0);
    const double rho0 = data.is_point ? data.point_rho0 : 2.0;
    const double g0 = data.is_point ? data.point_g0 : 0.0;

    const auto t_blow = characteristics::ep_blowup_time(rho0, g0);
    const bool supercritical = t_blow && *t_blow <= ec.horizon;

    for (double dt : dts) {
        ConvergenceRow row;
        row.dt = dt;
        if (supercritical) {
            row.flagged = true;
            row.note = "supercritical point excluded (breakdown before the horizon)";
            table.rows.push_back(row);
            continue;
        }
        if (ec.horizon == 0.0) {
            row.error = 0.0;
            row.note = "zero-length horizon";
            table.rows.push_back(row);
            continue;
        }
        const characteristics::CharTrajectory traj =
            characteristics::integrate_ep(rho0, g0, ec.horizon, dt);
        const auto& last = traj.states.back();
        const characteristics::EPState exact = characteristics::ep_closed_form(rho0, g0, last.t);
        row.error = std::max(std::abs(last.rho - exact.rho) / std::max(1e-300, std::abs(exact.rho)),
                             std::abs(last.g - exact.g) / std::max(1e-300, std::abs(exact.g)));
        table.rows.push_back(row);
    }

    int norder = 0;
    for (size_t i = 1; i < table.rows.size(); ++i) {
        auto& row = table.rows[i];
        const auto& prev = table.rows[i - 1];
        if (row.flagged || prev.flagged || row.error <= 0.0 || prev.error <= 0.0 ||
            row.dt == prev.dt)
            continue;
        row.order = std::log(prev.error / row.error) / std::log(prev.dt / row.dt);
        table.observed_order += row.order;
        ++norder;
    }
    if (norder > 0) table.observed_order /= norder;
    return table;
}

std::vector<std::string> write_convergence(const ExperimentConfig& ec,
                                           const ConvergenceTable& table) {
    fs::create_directories(ec.out_dir);
    const std::string base = ec.out_dir + "/" + ec.prefix;
    std::ofstream f(base + "_convergence.csv", std::ios::binary);
    f << "dt,error,order,flagged,note\n";
    for (const auto& row : table.rows)
        f << fmt(row.dt) << "," << fmt(row.error) << "," << fmt(row.order) << ","
          << (row.flagged ? 1 : 0) << ",\"" << row.note << "\"\n";
    std::vector<Section> m;
    Section s{"convergence", {}};
    s.second.push_back({"observed_order", fmt(table.observed_order)});
    s.second.push_back({"rows", std::to_string(table.rows.size())});
    m.push_back(s);
    write_manifest(base + "_convergence_manifest.txt", m);
    return {base + "_convergence.csv", base + "_convergence_manifest.txt"};
}

}  // namespace ctlab::harness
