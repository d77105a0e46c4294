#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ctlab/grid.hpp"
#include "ctlab/kernels.hpp"

namespace ctlab::thresholds {

// Forcing coefficient k (sign meaningful) and background c > 0 equal to
// the initial mass on the torus.
struct SystemParams {
    double k = 0.0;
    double c = 1.0;

    // lambda = 2 sqrt(k/c); defined only for k > 0.
    double lambda() const;
};

enum class Regime { Weak, Strong, Medium };

enum class KernelFlavor { Bounded, L1 };

// The scalar statistics the regime split and admissible conditions need.
// Bounded flavor uses (psi_min, psi_max); L1 flavor uses (l1_norm, gamma).
struct KernelStats {
    KernelFlavor flavor = KernelFlavor::Bounded;
    double psi_min = 0.0;
    double psi_max = 0.0;
    double l1_norm = 0.0;
    double gamma = 0.0;

    static KernelStats bounded(double psi_min, double psi_max);
    static KernelStats l1(double l1_norm, double gamma);
    static KernelStats of(const kernels::InfluenceKernel& k);

    // alignment strength proxies compared against lambda: for the bounded
    // flavor (psi_min, psi_max); for L1 (2*gamma, 2*(l1_norm - gamma)).
    double strength_lo() const;
    double strength_hi() const;
};

struct RegimeLabel {
    Regime regime = Regime::Weak;
    double lambda = 0.0;
    double strength_lo = 0.0;  // compared against lambda
    double strength_hi = 0.0;
};

const char* regime_name(Regime r);

// z parameters may be real, purely imaginary (tagged magnitude) or infinite.
enum class ZTag { Real, Imag, Inf };

struct ZValue {
    ZTag tag = ZTag::Real;
    double magnitude = 0.0;
};

struct ZParams {
    ZValue z_hat;    // from the upper strength
    ZValue z_tilde;  // from the lower strength
};

struct BranchFactor {
    double value = 0.0;
    bool diverged = false;  // imaginary magnitude >= 1
};

enum class Verdict { Subcritical, Critical, Supercritical, Unclassified };

const char* verdict_name(Verdict v);

struct Admissibility {
    double lhs = 0.0;
    double rhs = 0.0;
    bool admissible = false;
    bool evaluable = true;  // false when a z-term falls on the imaginary branch
};

struct PointVerdict {
    double x = 0.0;
    Verdict verdict = Verdict::Unclassified;
};

struct ThresholdReport {
    RegimeLabel regime;
    double lambda = 0.0;
    ZParams z;
    Admissibility admissible;
    std::vector<PointVerdict> pointwise;
};

// --- operations ---------------------------------------------------------

// Weak / Strong / Medium split. Throws for k <= 0 (regimes undefined; the
// alignment-only path handles k = 0).
RegimeLabel classify_regime(const KernelStats& stats, const SystemParams& params);

ZParams z_params(const KernelStats& stats, const SystemParams& params);

// tan^-1(z)/z continued across the branches: artanh(y)/y for imaginary
// magnitude y in (0,1), 1 at z = 0, 0 at z = infinity. Diverges for
// imaginary magnitude >= 1.
BranchFactor branch_factor(ZValue z);

// The regime's structural inequality: lhs is the kernel's offset from a
// constant, rhs the oscillation budget assembled from branch_factor and
// exponential decay terms. Strong alignment needs no condition.
Admissibility admissibility(const KernelStats& stats, const SystemParams& params, Regime regime);

// Pressureless Euler-Poisson pointwise verdict against g = -sqrt(2 rho).
Verdict ep_pointwise(double g0, double rho0);

// Relaxation-system pointwise verdict: subcritical iff u0x + rho0 >= 0.
Verdict relax_pointwise(double u0x, double rho0);

// Alignment-only (k = 0) global criterion: subcritical iff min G0 > 0.
Verdict ea_global_check(const GridField& g0);

// Density bound along a strictly hyperbolic local velocity law v = f(u):
//   rho0 |f(u0)-u0| / ( e^{int_{u0}^{u} dxi/(f(xi)-xi)} |f(u)-u| ).
// Throws if f(xi) = xi is hit on the integration path.
double strict_hyperbolic_density_bound(const std::function<double(double)>& f,
                                       double u0, double rho0, double u);

// Convexity/monotonicity side conditions for general local laws f(rho, u),
// probed by finite differences over the sampled data range.
struct SideConditionReport {
    bool base_holds = false;        // u0x + rho0 >= 0 everywhere
    bool increasing_set_holds = false;  // (rho f)_rr >= 0, f_uu <= 0, rho0x >= 0, u0xx + rho0x >= 0
    bool decreasing_set_holds = false;  // all mirrored
    double worst_base = 0.0;
    std::string detail;
};

SideConditionReport convexity_side_conditions(
    const std::function<double(double, double)>& f,
    const GridField& rho0, const GridField& u0);

}  // namespace ctlab::thresholds
