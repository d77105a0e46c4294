#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "ctlab/grid.hpp"
#include "ctlab/kernels.hpp"

namespace ctlab::families {

// Named, versioned initial-data families so experiments are reproducible
// by config alone. Every numeric parameter can be overridden by name,
// which is what sweep axes act on.
struct FamilySpec {
    std::string name;
    std::map<std::string, double> params;
    std::uint64_t seed = 1;

    double get(const std::string& key, double fallback) const {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }
    bool has(const std::string& key) const { return params.count(key) > 0; }
};

struct InitialData {
    std::string name;     // name@version
    std::function<double(double)> rho0;
    std::function<double(double)> u0;
    std::function<double(double)> u0x;
    // alignment-only experiments pin G0 directly
    std::optional<std::function<double(double)>> g0_override;
    // point-family payload (single EP characteristic)
    bool is_point = false;
    double point_rho0 = 0.0;
    double point_g0 = 0.0;
};

// Families:
//   point             rho0, g0
//   steady-state      ubar           (rho0 = c)
//   sine-perturbation amplitude, modes, u_amplitude, ubar, phase,
//                     random_phases (uses seed)
//   gaussian-dip      u_far, dip_depth, dip_width, rho_far, rho_amp, rho_width
//   ea-uniform-g      amplitude, modes, ubar (G0 pinned to the discrete
//                     steady value c*||psi||; needs the kernel and grid n)
InitialData build_family(const FamilySpec& spec, double c,
                         const kernels::InfluenceKernel* kernel, int grid_n);

GridField sample_line(const std::function<double(double)>& f, int n, double half_length);

}  // namespace ctlab::families
