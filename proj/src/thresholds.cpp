#include "ctlab/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace ctlab::thresholds {

double SystemParams::lambda() const {
    if (k <= 0.0) throw std::domain_error("lambda requires k > 0");
    if (c <= 0.0) throw std::domain_error("lambda requires c > 0");
    return 2.0 * std::sqrt(k / c);
}

KernelStats KernelStats::bounded(double psi_min, double psi_max) {
    if (psi_min < 0.0 || psi_max < psi_min)
        throw std::invalid_argument("need 0 <= psi_min <= psi_max");
    KernelStats s;
    s.flavor = KernelFlavor::Bounded;
    s.psi_min = psi_min;
    s.psi_max = psi_max;
    return s;
}

KernelStats KernelStats::l1(double l1_norm, double gamma) {
    if (l1_norm <= 0.0) throw std::invalid_argument("need l1_norm > 0");
    if (gamma < 0.0 || gamma > 0.5 * l1_norm + 1e-12 * l1_norm)
        throw std::invalid_argument("need 0 <= gamma <= l1_norm/2");
    KernelStats s;
    s.flavor = KernelFlavor::L1;
    s.l1_norm = l1_norm;
    s.gamma = std::min(gamma, 0.5 * l1_norm);
    return s;
}

KernelStats KernelStats::of(const kernels::InfluenceKernel& k) {
    if (std::holds_alternative<kernels::L1Kernel>(k)) {
        const auto& v = std::get<kernels::L1Kernel>(k);
        return l1(v.l1_norm, v.gamma);
    }
    const auto& v = std::get<kernels::BoundedKernel>(k);
    return bounded(v.psi_min, v.psi_max);
}

double KernelStats::strength_lo() const {
    return flavor == KernelFlavor::Bounded ? psi_min : 2.0 * gamma;
}

double KernelStats::strength_hi() const {
    return flavor == KernelFlavor::Bounded ? psi_max : 2.0 * (l1_norm - gamma);
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::Weak: return "weak";
        case Regime::Strong: return "strong";
        case Regime::Medium: return "medium";
    }
    return "?";
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Subcritical: return "subcritical";
        case Verdict::Critical: return "critical";
        case Verdict::Supercritical: return "supercritical";
        case Verdict::Unclassified: return "unclassified";
    }
    return "?";
}

RegimeLabel classify_regime(const KernelStats& stats, const SystemParams& params) {
    if (params.k <= 0.0)
        throw std::domain_error("regimes are defined for k > 0 only");
    RegimeLabel label;
    label.lambda = params.lambda();
    label.strength_lo = stats.strength_lo();
    label.strength_hi = stats.strength_hi();
    // Bounded: weak psi_max < lambda; strong psi_min >= lambda; else medium.
    // L1: the same split with (2 gamma, 2(|psi|-gamma)) against lambda.
    if (label.strength_hi < label.lambda)
        label.regime = Regime::Weak;
    else if (label.strength_lo >= label.lambda)
        label.regime = Regime::Strong;
    else
        label.regime = Regime::Medium;
    return label;
}

static ZValue z_from_strength(double lambda, double strength) {
    ZValue z;
    if (strength == 0.0) {
        z.tag = ZTag::Inf;
        z.magnitude = std::numeric_limits<double>::infinity();
        return z;
    }
    const double r = lambda / strength;
    if (r >= 1.0) {
        z.tag = ZTag::Real;
        z.magnitude = std::sqrt(r * r - 1.0);
    } else {
        z.tag = ZTag::Imag;
        z.magnitude = std::sqrt(1.0 - r * r);
    }
    return z;
}

ZParams z_params(const KernelStats& stats, const SystemParams& params) {
    const double lambda = params.lambda();
    ZParams z;
    z.z_hat = z_from_strength(lambda, stats.strength_hi());
    z.z_tilde = z_from_strength(lambda, stats.strength_lo());
    return z;
}

BranchFactor branch_factor(ZValue z) {
    BranchFactor out;
    switch (z.tag) {
        case ZTag::Inf:
            out.value = 0.0;
            return out;
        case ZTag::Real:
            out.value = z.magnitude == 0.0 ? 1.0 : std::atan(z.magnitude) / z.magnitude;
            return out;
        case ZTag::Imag: {
            const double y = z.magnitude;
            if (y >= 1.0) {
                out.value = std::numeric_limits<double>::infinity();
                out.diverged = true;
                return out;
            }
            out.value = y == 0.0 ? 1.0 : std::atanh(y) / y;
            return out;
        }
    }
    return out;
}

// e^{-pi/z} with the limits e^{-pi/inf} = 1 and e^{-pi/0+} = 0. Imaginary
// arguments are not evaluated (reported non-evaluable upstream).
static bool exp_decay_term(ZValue z, double* out) {
    switch (z.tag) {
        case ZTag::Inf:
            *out = 1.0;
            return true;
        case ZTag::Real:
            *out = z.magnitude == 0.0 ? 0.0 : std::exp(-M_PI / z.magnitude);
            return true;
        case ZTag::Imag:
            return false;
    }
    return false;
}

Admissibility admissibility(const KernelStats& stats, const SystemParams& params, Regime regime) {
    Admissibility adm;
    adm.lhs = stats.flavor == KernelFlavor::Bounded
                  ? stats.psi_max - stats.psi_min
                  : 4.0 * (stats.l1_norm - 2.0 * stats.gamma);

    if (regime == Regime::Strong) {
        // strong alignment decays without oscillation; no condition needed
        adm.lhs = 0.0;
        adm.rhs = std::numeric_limits<double>::infinity();
        adm.admissible = true;
        return adm;
    }

    const double lambda = params.lambda();
    const ZParams z = z_params(stats, params);
    const BranchFactor bf = branch_factor(z.z_hat);
    double decay_tilde = 0.0;
    if (bf.diverged || !exp_decay_term(z.z_tilde, &decay_tilde)) {
        adm.evaluable = false;
        adm.admissible = false;
        adm.rhs = std::numeric_limits<double>::quiet_NaN();
        return adm;
    }

    if (regime == Regime::Weak) {
        double decay_hat = 0.0;
        if (!exp_decay_term(z.z_hat, &decay_hat)) {
            adm.evaluable = false;
            adm.admissible = false;
            adm.rhs = std::numeric_limits<double>::quiet_NaN();
            return adm;
        }
        adm.rhs = std::exp(bf.value) * (1.0 - decay_tilde * decay_hat) /
                  (2.0 * (1.0 + decay_tilde)) * lambda;
    } else {  // medium
        adm.rhs = std::exp(bf.value) / (2.0 * (1.0 + decay_tilde)) * lambda;
    }
    adm.admissible = adm.lhs < adm.rhs;
    return adm;
}

Verdict ep_pointwise(double g0, double rho0) {
    if (rho0 < 0.0) throw std::invalid_argument("ep_pointwise: rho0 must be >= 0");
    if (rho0 == 0.0) {
        // the threshold curve passes through the origin; with no density the
        // slope obeys g' = -g^2, global iff g0 >= 0
        return g0 >= 0.0 ? Verdict::Subcritical : Verdict::Supercritical;
    }
    const double crit = -std::sqrt(2.0 * rho0);
    if (g0 > crit) return Verdict::Subcritical;
    if (g0 == crit) return Verdict::Critical;
    return Verdict::Supercritical;
}

Verdict relax_pointwise(double u0x, double rho0) {
    if (rho0 < 0.0) throw std::invalid_argument("relax_pointwise: rho0 must be >= 0");
    return u0x + rho0 >= 0.0 ? Verdict::Subcritical : Verdict::Supercritical;
}

Verdict ea_global_check(const GridField& g0) {
    return g0.min() > 0.0 ? Verdict::Subcritical : Verdict::Unclassified;
}

double strict_hyperbolic_density_bound(const std::function<double(double)>& f,
                                       double u0, double rho0, double u) {
    const double lo = std::min(u0, u);
    const double hi = std::max(u0, u);
    // degeneracy scan: f(xi) - xi must keep one sign on the path
    const int probes = 512;
    const double f0 = f(u0) - u0;
    if (f0 == 0.0) throw std::domain_error("density bound: f(u0) = u0 (not strictly hyperbolic)");
    for (int i = 0; i <= probes; ++i) {
        const double xi = lo + (hi - lo) * i / probes;
        const double d = f(xi) - xi;
        if (d == 0.0 || (d > 0.0) != (f0 > 0.0))
            throw std::domain_error("density bound: hyperbolicity degenerates on the path");
    }
    double integral = 0.0;
    if (u != u0) {
        auto integrand = [&f](double xi) { return 1.0 / (f(xi) - xi); };
        integral = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
            integrand, u0, u, 10, 1e-12);
    }
    const double denom = std::exp(integral) * std::abs(f(u) - u);
    return rho0 * std::abs(f(u0) - u0) / denom;
}

SideConditionReport convexity_side_conditions(
    const std::function<double(double, double)>& f,
    const GridField& rho0, const GridField& u0) {
    if (!same_domain(rho0, u0))
        throw std::invalid_argument("side conditions: rho0 and u0 must share a grid");

    SideConditionReport rep;
    const GridField rho0x = centered_derivative(rho0);
    const GridField u0x = centered_derivative(u0);
    const GridField u0xx = centered_derivative(u0x);

    const double tol = 1e-10;
    double worst_base = std::numeric_limits<double>::infinity();
    bool inc_data = true, dec_data = true;
    // line windows: skip the cells whose stencils straddle the constant
    // far-field extension
    const int lo = rho0.domain == Domain::Line ? 2 : 0;
    const int hi = rho0.domain == Domain::Line ? rho0.n - 2 : rho0.n;
    for (int i = lo; i < hi; ++i) {
        worst_base = std::min(worst_base, u0x[i] + rho0[i]);
        const double curv = u0xx[i] + rho0x[i];
        if (rho0x[i] < -tol || curv < -tol) inc_data = false;
        if (rho0x[i] > tol || curv > tol) dec_data = false;
    }
    rep.worst_base = worst_base;
    rep.base_holds = worst_base >= -tol;

    // probe (rho f)_rr and f_uu by central differences over the data range
    const double rho_lo = std::max(1e-6, rho0.min());
    const double rho_hi = std::max(rho_lo + 1e-6, rho0.max());
    const double u_lo = u0.min(), u_hi = std::max(u0.max(), u0.min() + 1e-6);
    bool rf_rr_nonneg = true, rf_rr_nonpos = true;
    bool f_uu_nonneg = true, f_uu_nonpos = true;
    const int np = 9;
    for (int a = 0; a < np; ++a) {
        for (int b = 0; b < np; ++b) {
            const double r = rho_lo + (rho_hi - rho_lo) * a / (np - 1);
            const double u = u_lo + (u_hi - u_lo) * b / (np - 1);
            const double hr = 1e-4 * (1.0 + std::abs(r));
            const double hu = 1e-4 * (1.0 + std::abs(u));
            auto rf = [&](double rr) { return rr * f(rr, u); };
            const double rf_rr = (rf(r + hr) - 2.0 * rf(r) + rf(r - hr)) / (hr * hr);
            const double f_uu = (f(r, u + hu) - 2.0 * f(r, u) + f(r, u - hu)) / (hu * hu);
            const double probe_tol = 1e-5;
            if (rf_rr < -probe_tol) rf_rr_nonneg = false;
            if (rf_rr > probe_tol) rf_rr_nonpos = false;
            if (f_uu < -probe_tol) f_uu_nonneg = false;
            if (f_uu > probe_tol) f_uu_nonpos = false;
        }
    }
    rep.increasing_set_holds = rep.base_holds && rf_rr_nonneg && f_uu_nonpos && inc_data;
    rep.decreasing_set_holds = rep.base_holds && rf_rr_nonpos && f_uu_nonneg && dec_data;
    rep.detail = std::string("(rho f)_rr ") + (rf_rr_nonneg ? ">=0" : (rf_rr_nonpos ? "<=0" : "mixed")) +
                 ", f_uu " + (f_uu_nonpos ? "<=0" : (f_uu_nonneg ? ">=0" : "mixed")) +
                 ", data " + (inc_data ? "increasing-compatible" : (dec_data ? "decreasing-compatible" : "mixed"));
    return rep;
}

}  // namespace ctlab::thresholds
