#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ctlab/detectors.hpp"
#include "ctlab/grid.hpp"
#include "ctlab/kernels.hpp"
#include "ctlab/thresholds.hpp"

namespace ctlab::eulerian {

// Solves -phi_xx = rho - c on the torus spectrally and returns phi_x with
// zero mean. The input must have zero mean to 1e-12.
GridField poisson_periodic(const GridField& rho_minus_c);

struct Snapshot {
    double t = 0.0;
    GridField rho;
    GridField u;
    GridField e_fd;  // u_x + rho, centered differences
    GridField aux;   // G (epa) | v (relax-nonlocal) | evolved e (relax-local)
};

struct FieldTimeline {
    std::vector<Snapshot> snapshots;
    detectors::RunSeries series;

    // per-snapshot diagnostics (parallel to snapshots)
    std::vector<double> snap_t;
    std::vector<double> g_residual;      // epa: ||u_x - (G - psi*rho)||_inf
    std::vector<double> hyp_margin;      // relax-local: inf |f - u|
    std::vector<double> e_min, e_max;    // evolved e range (relax systems)
    std::vector<double> efd_min, efd_max;  // finite-difference e range
    std::vector<double> e_mismatch;      // ||e_evolved - e_fd||_inf (relax-local)
    std::vector<double> rho_min, rho_max;
    std::vector<double> rhox_max;        // ||rho_x||_inf
    std::vector<double> g_min, g_max;    // epa: evolved G range
    std::vector<double> density_ratio_global;  // max_i rho_i / bound_i, whole-line numerator
    std::vector<double> density_ratio_local;   // same with characteristic-local numerator
    std::vector<double> fu_max;          // relax-local: max f_u over cells

    // conservation ledger
    double mass_initial = 0.0;
    double mass_final = 0.0;
    double boundary_flux_total = 0.0;  // line solvers: accumulated net outflow
    double mass_drift_per_step_max = 0.0;

    std::vector<std::string> warnings;
};

struct SolveOptions {
    double T = 1.0;
    double cfl = 0.4;
    double dt_max = 1e30;  // cap when wave speeds vanish
    int snapshots = 50;
    double state_guard = detectors::kStateGuard;
    double gradient_guard = detectors::kGradientGuard;
    long max_steps = 5'000'000;
    bool track_density_bound = false;  // relax-local, f = f(u) only
};

// Euler-Poisson-alignment on the torus: conservative updates for rho and
// G, primitive upwind update for u driven by the momentum equation, with
// the G-relation residual recorded per snapshot.
FieldTimeline solve_epa(const GridField& rho0, const GridField& u0,
                        const kernels::InfluenceKernel& psi,
                        const thresholds::SystemParams& params,
                        const SolveOptions& opt);

// Nonlocal relaxation on a truncated line, v = Q * u. The diagnostic
// quantity e = u_x + rho is evolved alongside the primary fields (it obeys
// e_t + u e_x = -e(e - rho) for any velocity average) and serves as the
// breakdown witness.
FieldTimeline solve_relax_nonlocal(const GridField& rho0, const GridField& u0,
                                   const kernels::RelaxKernel& q,
                                   const SolveOptions& opt);

// Local velocity law v = f(rho, u) (or f(u)).
struct VelocityLaw {
    std::function<double(double, double)> f;  // (rho, u)
    bool depends_on_rho = false;
    std::string name;

    double operator()(double rho, double u) const { return f(rho, u); }
    double fu(double rho, double u) const;
    double frho(double rho, double u) const;
};

VelocityLaw linear_u_law(double a, double b);                   // f(u) = a u + b
VelocityLaw linear_rho_u_law(double ar, double au, double b);   // f = ar rho + au u + b

// Local relaxation: primary fields plus the transformed diagnostic pair
// (rho_d, e) evolved on the same grid; hyperbolicity margin, density-bound
// ratios and f_u sign recorded per snapshot.
FieldTimeline solve_relax_local(const GridField& rho0, const GridField& u0,
                                const VelocityLaw& law, const SolveOptions& opt);

}  // namespace ctlab::eulerian
