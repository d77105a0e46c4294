#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ctlab/grid.hpp"

namespace ctlab::kernels {

// Statistics of an integrable influence function: L1 norm over the torus
// and gamma, the tail integral of its decreasing rearrangement over the
// second half of the measure.
struct L1Stats {
    double l1_norm = 0.0;
    double gamma = 0.0;
};

// Bounded influence function on the torus, 0 <= psi_min <= psi <= psi_max,
// symmetric about 0. Sampled on the shared uniform grid; `eval` gives the
// value at an arbitrary separation (used by the particle solver).
struct BoundedKernel {
    GridField samples;  // torus grid
    double psi_min = 0.0;
    double psi_max = 0.0;
    std::function<double(double)> eval;  // symmetric, takes wrapped separation
    std::string name;

    double value(double dx) const { return eval(torus_wrap(dx)); }
    // Effective pointwise value at separation 0 (regular for bounded psi).
    double zero_value(double /*cell_width*/) const { return eval(0.0); }
};

// Integrable influence function, possibly unbounded at 0. The sample grid
// stores the effective values used by quadrature: the cell containing the
// singularity holds the analytic local integral divided by the cell width.
struct L1Kernel {
    GridField samples;  // effective samples on the torus grid
    double l1_norm = 0.0;
    double gamma = 0.0;
    std::function<double(double)> eval;  // symmetric, undefined at exactly 0
    // integral of psi over [-w/2, w/2]; required when psi is singular at 0
    std::function<double(double)> cell_mass_near_zero;
    bool singular_at_zero = false;
    std::string name;

    double value(double dx) const { return eval(torus_wrap(dx)); }
    double zero_value(double cell_width) const {
        if (singular_at_zero) return cell_mass_near_zero(cell_width) / cell_width;
        return eval(0.0);
    }
};

using InfluenceKernel = std::variant<BoundedKernel, L1Kernel>;

// Relaxation kernel on the real line: symmetric, unit mass, nonincreasing
// away from the origin. `support_radius` truncates quadrature.
struct RelaxKernel {
    std::function<double(double)> eval;
    double support_radius = 0.0;
    double l1_norm = 1.0;
    std::string name;
};

struct KernelCheck {
    std::string what;
    bool pass = false;
    double residual = 0.0;
};

struct ValidationReport {
    std::vector<KernelCheck> checks;
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

// --- construction -----------------------------------------------------

BoundedKernel constant_kernel(double a, int n);
BoundedKernel tophat_kernel(double height, double half_width, int n);
BoundedKernel triangle_kernel(double height, double half_width, int n);
// offset + amplitude*cos(2 pi x); needs offset >= |amplitude| >= 0
BoundedKernel cosine_kernel(double offset, double amplitude, int n);
BoundedKernel exponential_kernel(double amplitude, double rate, int n);
BoundedKernel tabulated_kernel(const std::vector<double>& samples);
// amplitude * |x|^(-exponent), 0 < exponent < 1 (integrable singularity)
L1Kernel power_singular_kernel(double amplitude, double exponent, int n);
// wrap any bounded kernel as the L1 flavor (stats recomputed)
L1Kernel as_l1(const BoundedKernel& k);

RelaxKernel gaussian_relax_kernel(double sigma, double support_radius);
RelaxKernel exponential_relax_kernel(double support_radius);  // e^{-|x|}/2
RelaxKernel tophat_relax_kernel(double half_width);

// --- operations -------------------------------------------------------

// Quadrature approximation of (psi * rho)(x_i) on the shared torus grid.
// Direct O(N^2) reference; the fast transform path must match it to 1e-10
// relative and is what the solvers use.
GridField periodic_convolve_direct(const GridField& psi_samples, const GridField& rho);
GridField periodic_convolve_fast(const GridField& psi_samples, const GridField& rho);

GridField periodic_convolve(const BoundedKernel& psi, const GridField& rho);
GridField periodic_convolve(const L1Kernel& psi, const GridField& rho);
GridField periodic_convolve(const InfluenceKernel& psi, const GridField& rho);

// L1 norm and gamma by midpoint sampling (avoids the point x = 0) and
// sorting. Throws if refinement of the L1 quadrature fails to settle,
// which flags a non-integrable singularity.
L1Stats l1_stats(const std::function<double(double)>& psi, int n_samples);

// gamma of an explicit sample set, each sample carrying measure 1/size.
double gamma_of_samples(std::vector<double> samples);

ValidationReport validate_relax_kernel(const RelaxKernel& q, int n_quad = 1 << 14);

// Accessors over the variant.
const GridField& kernel_samples(const InfluenceKernel& k);
double kernel_value(const InfluenceKernel& k, double dx);
double kernel_zero_value(const InfluenceKernel& k, double cell_width);
double kernel_l1_norm(const InfluenceKernel& k);
const std::string& kernel_name(const InfluenceKernel& k);

}  // namespace ctlab::kernels
