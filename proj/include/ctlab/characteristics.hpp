#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ctlab/detectors.hpp"
#include "ctlab/grid.hpp"
#include "ctlab/kernels.hpp"
#include "ctlab/thresholds.hpp"

namespace ctlab::characteristics {

// State along a pressureless Euler-Poisson characteristic: density and
// g = u_x. If rho(0) > 0 then rho stays positive up to breakdown.
struct EPState {
    double rho = 0.0;
    double g = 0.0;
    double t = 0.0;
};

// Exact solution through 1/rho(t) = t^2/2 + t g0/rho0 + 1/rho0.
// Throws past the breakdown time (quadratic nonpositive).
EPState ep_closed_form(double rho0, double g0, double t);

// Smallest positive root of the quadratic, when the trajectory breaks down.
std::optional<double> ep_blowup_time(double rho0, double g0);

struct CharTrajectory {
    std::vector<EPState> states;  // states[i].t increasing
    detectors::RunSeries series;
};

// Classical fourth-order fixed-step integration of rho' = -rho g,
// g' = -g^2 + rho, with step halving on rejection and a state guard.
CharTrajectory integrate_ep(double rho0, double g0, double T, double dt);

// Particle discretization of the alignment dynamics on the torus: each
// particle carries (alpha, x, u, rho, G, mass); mass weights come from the
// initial density quadrature and are never mutated.
struct EPAEnsemble {
    std::vector<double> alpha;
    std::vector<double> x;  // unwrapped positions; ordering monitored
    std::vector<double> u;
    std::vector<double> rho;
    std::vector<double> G;
    std::vector<double> mass;
    thresholds::SystemParams params;  // params.c is set to the discrete mass
    kernels::InfluenceKernel kernel;
    int poisson_grid = 0;  // grid size for the electric-force solve

    int size() const { return static_cast<int>(alpha.size()); }
    double total_mass() const;
    double total_momentum() const;
};

// Builds the ensemble from initial fields sampled at m equidistant labels.
// G0 defaults to u0x + psi*rho0 evaluated with the same discrete particle
// quadrature; pass g0_override to pin it (alignment-only experiments).
EPAEnsemble make_epa_ensemble(const std::function<double(double)>& rho0,
                              const std::function<double(double)>& u0,
                              const std::function<double(double)>& u0x,
                              const kernels::InfluenceKernel& kernel,
                              double k, int particles, int poisson_grid,
                              const std::optional<std::function<double(double)>>& g0_override = {});

struct EnsembleSnapshot {
    double t = 0.0;
    std::vector<double> x, u, rho, G;
};

struct EnsembleTrajectory {
    std::vector<double> alpha, mass;
    std::vector<EnsembleSnapshot> snapshots;
    std::vector<double> consistency_residual;  // max |u_x - (G - psi*rho)| per snapshot
    std::vector<double> momentum;              // total momentum per snapshot
    detectors::RunSeries series;
};

struct EnsembleOptions {
    double T = 1.0;
    double dt = 1e-3;
    int snapshots = 50;
    double state_guard = detectors::kStateGuard;
};

// Fourth-order fixed-step integration of the characteristic system with
// the pairwise alignment sums and the periodic electric force. Particle
// crossing terminates the run with a breakdown flag.
EnsembleTrajectory integrate_epa_ensemble(const EPAEnsemble& init, const EnsembleOptions& opt);

}  // namespace ctlab::characteristics
