#include "ctlab/eulerian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ctlab/fft.hpp"

namespace ctlab::eulerian {

GridField poisson_periodic(const GridField& rho_minus_c) {
    if (rho_minus_c.domain != Domain::Torus)
        throw std::invalid_argument("poisson_periodic: torus field required");
    const int n = rho_minus_c.n;
    double mean = 0.0;
    for (double v : rho_minus_c.values) mean += v;
    mean /= n;
    if (std::abs(mean) > 1e-12 * std::max(1.0, rho_minus_c.max_abs()))
        throw std::invalid_argument("poisson_periodic: input must have zero mean");

    std::vector<std::complex<double>> f(rho_minus_c.values.begin(), rho_minus_c.values.end());
    fft::transform(f, false);
    f[0] = 0.0;
    for (int k = 1; k < n; ++k) {
        int m = k <= n / 2 ? k : k - n;
        if (2 * std::abs(m) == n) {  // drop the Nyquist mode
            f[static_cast<size_t>(k)] = 0.0;
            continue;
        }
        // -phi'' = f  =>  (phi_x)^ = i f^ / (2 pi m)
        f[static_cast<size_t>(k)] *= std::complex<double>(0.0, 1.0 / (2.0 * M_PI * m));
    }
    fft::transform(f, true);
    GridField out = GridField::torus(n);
    for (int i = 0; i < n; ++i) out[i] = f[static_cast<size_t>(i)].real() / n;
    return out;
}

double VelocityLaw::fu(double rho, double u) const {
    const double h = 1e-6 * (1.0 + std::abs(u));
    return (f(rho, u + h) - f(rho, u - h)) / (2.0 * h);
}

double VelocityLaw::frho(double rho, double u) const {
    if (!depends_on_rho) return 0.0;
    const double h = 1e-6 * (1.0 + std::abs(rho));
    return (f(rho + h, u) - f(rho - h, u)) / (2.0 * h);
}

VelocityLaw linear_u_law(double a, double b) {
    VelocityLaw law;
    law.f = [a, b](double, double u) { return a * u + b; };
    law.depends_on_rho = false;
    law.name = "linear-u";
    return law;
}

VelocityLaw linear_rho_u_law(double ar, double au, double b) {
    VelocityLaw law;
    law.f = [ar, au, b](double rho, double u) { return ar * rho + au * u + b; };
    law.depends_on_rho = ar != 0.0;
    law.name = "linear-rho-u";
    return law;
}

// --- scheme helpers -------------------------------------------------------

namespace {

constexpr double kTheta = 1.3;  // generalized minmod parameter

double minmod3(double a, double b, double c) {
    if (a > 0.0 && b > 0.0 && c > 0.0) return std::min(std::min(a, b), c);
    if (a < 0.0 && b < 0.0 && c < 0.0) return std::max(std::max(a, b), c);
    return 0.0;
}

// Undivided limited slope per cell, with ghost access through at().
std::vector<double> limited_slopes(const GridField& f) {
    std::vector<double> s(static_cast<size_t>(f.n));
    for (int i = 0; i < f.n; ++i) {
        const double wm = f.at(i - 1), w0 = f.at(i), wp = f.at(i + 1);
        s[static_cast<size_t>(i)] =
            minmod3(kTheta * (w0 - wm), 0.5 * (wp - wm), kTheta * (wp - w0));
    }
    return s;
}

double slope_at(const std::vector<double>& s, const GridField& f, int i) {
    if (f.domain == Domain::Torus) {
        int j = i % f.n;
        if (j < 0) j += f.n;
        return s[static_cast<size_t>(j)];
    }
    if (i < 0 || i >= f.n) return 0.0;  // constant far-field extension
    return s[static_cast<size_t>(i)];
}

struct FluxResult {
    std::vector<double> divergence;  // (F_{i+1/2} - F_{i-1/2}) / h
    double boundary_left = 0.0;      // F at the left edge (line only)
    double boundary_right = 0.0;     // F at the right edge (line only)
};

// Conservative local Lax-Friedrichs divergence of the flux q * w, with
// minmod reconstruction for both fields. `extra_speed` optionally widens
// the dissipation speed per interface (for eigenvalues beyond |w|).
FluxResult conservative_divergence(
    const GridField& q, const std::vector<double>& sq,
    const GridField& w, const std::vector<double>& sw,
    const std::function<double(int)>& extra_speed = {}) {
    const int n = q.n;
    const double h = q.h();
    FluxResult out;
    out.divergence.assign(static_cast<size_t>(n), 0.0);

    auto flux_at = [&](int i) {  // interface between cells i and i+1
        const double ql = q.at(i) + 0.5 * slope_at(sq, q, i);
        const double qr = q.at(i + 1) - 0.5 * slope_at(sq, q, i + 1);
        const double wl = w.at(i) + 0.5 * slope_at(sw, w, i);
        const double wr = w.at(i + 1) - 0.5 * slope_at(sw, w, i + 1);
        double a = std::max(std::abs(wl), std::abs(wr));
        if (extra_speed) a = std::max(a, extra_speed(i));
        return 0.5 * (ql * wl + qr * wr) - 0.5 * a * (qr - ql);
    };

    if (q.domain == Domain::Torus) {
        std::vector<double> F(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) F[static_cast<size_t>(i)] = flux_at(i);
        for (int i = 0; i < n; ++i) {
            const double Fm = F[static_cast<size_t>((i - 1 + n) % n)];
            out.divergence[static_cast<size_t>(i)] = (F[static_cast<size_t>(i)] - Fm) / h;
        }
    } else {
        std::vector<double> F(static_cast<size_t>(n + 1));
        for (int j = 0; j <= n; ++j) F[static_cast<size_t>(j)] = flux_at(j - 1);
        for (int i = 0; i < n; ++i)
            out.divergence[static_cast<size_t>(i)] =
                (F[static_cast<size_t>(i + 1)] - F[static_cast<size_t>(i)]) / h;
        out.boundary_left = F[0];
        out.boundary_right = F[static_cast<size_t>(n)];
    }
    return out;
}

// Non-conservative upwind advection term c * w_x using the upwind value of
// the reconstruction at each interface; second order in smooth regions.
std::vector<double> advective_term(const GridField& w, const std::vector<double>& sw,
                                   const GridField& c, const std::vector<double>& sc) {
    const int n = w.n;
    const double h = w.h();
    auto upwind_value = [&](int i) {  // interface between cells i and i+1
        const double cl = c.at(i) + 0.5 * slope_at(sc, c, i);
        const double cr = c.at(i + 1) - 0.5 * slope_at(sc, c, i + 1);
        const double wl = w.at(i) + 0.5 * slope_at(sw, w, i);
        const double wr = w.at(i + 1) - 0.5 * slope_at(sw, w, i + 1);
        return (cl + cr) >= 0.0 ? wl : wr;
    };
    std::vector<double> out(static_cast<size_t>(n));
    if (w.domain == Domain::Torus) {
        std::vector<double> W(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) W[static_cast<size_t>(i)] = upwind_value(i);
        for (int i = 0; i < n; ++i) {
            const double wm = W[static_cast<size_t>((i - 1 + n) % n)];
            out[static_cast<size_t>(i)] = c[i] * (W[static_cast<size_t>(i)] - wm) / h;
        }
    } else {
        std::vector<double> W(static_cast<size_t>(n + 1));
        for (int j = 0; j <= n; ++j) W[static_cast<size_t>(j)] = upwind_value(j - 1);
        for (int i = 0; i < n; ++i)
            out[static_cast<size_t>(i)] =
                c[i] * (W[static_cast<size_t>(i + 1)] - W[static_cast<size_t>(i)]) / h;
    }
    return out;
}

GridField fd_e(const GridField& u, const GridField& rho) {
    GridField e = centered_derivative(u);
    for (int i = 0; i < e.n; ++i) e[i] += rho[i];
    if (e.domain == Domain::Line) {
        e.far_left = rho.far_left;
        e.far_right = rho.far_right;
    }
    return e;
}

void clip_negative_density(GridField& rho, double floor_flag, bool* flagged) {
    for (int i = 0; i < rho.n; ++i) {
        if (rho[i] < 0.0) {
            if (rho[i] < -floor_flag) *flagged = true;
            rho[i] = 0.0;
        }
    }
}

bool all_finite(const GridField& f) {
    for (double v : f.values)
        if (!std::isfinite(v)) return false;
    return true;
}

void record_series(detectors::RunSeries& s, double t, double witness, double max_ux,
                   double min_rho, double max_rho) {
    s.t.push_back(t);
    s.witness.push_back(witness);
    s.max_ux.push_back(max_ux);
    s.min_rho.push_back(min_rho);
    s.max_rho.push_back(max_rho);
}

double max_abs_derivative(const GridField& f) {
    double m = 0.0;
    const double inv2h = 1.0 / (2.0 * f.h());
    for (int i = 0; i < f.n; ++i)
        m = std::max(m, std::abs((f.at(i + 1) - f.at(i - 1)) * inv2h));
    return m;
}

int argmax_abs(const GridField& f) {
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < f.n; ++i) {
        const double a = std::abs(f[i]);
        if (a > best) {
            best = a;
            arg = i;
        }
    }
    return arg;
}

void add_warning_once(std::vector<std::string>& warnings, const std::string& msg) {
    for (const auto& w : warnings)
        if (w == msg) return;
    warnings.push_back(msg);
}

}  // namespace

// --- EPA on the torus -----------------------------------------------------

FieldTimeline solve_epa(const GridField& rho0, const GridField& u0,
                        const kernels::InfluenceKernel& psi,
                        const thresholds::SystemParams& params,
                        const SolveOptions& opt) {
    if (rho0.domain != Domain::Torus || !same_domain(rho0, u0))
        throw std::invalid_argument("solve_epa: torus fields on a shared grid required");
    if (rho0.min() < 0.0) throw std::invalid_argument("solve_epa: rho0 must be nonnegative");
    if (opt.cfl <= 0.0 || opt.cfl >= 1.0) throw std::invalid_argument("solve_epa: cfl in (0,1)");

    const int n = rho0.n;
    const double h = rho0.h();
    const double c = rho0.mass();  // background equals the initial mass
    const double k = params.k;

    FieldTimeline tl;
    tl.series.horizon = opt.T;

    GridField rho = rho0;
    GridField u = u0;
    // G0 = u0x + psi * rho0 on the shared grid
    GridField G = GridField::torus(n);
    {
        std::vector<double> ux = fft::periodic_derivative(u0.values);
        GridField conv = kernels::periodic_convolve_fast(kernels::kernel_samples(psi), rho0);
        for (int i = 0; i < n; ++i) G[i] = ux[static_cast<size_t>(i)] + conv[i];
    }

    bool negative_flagged = false;

    auto rhs = [&](const GridField& r, const GridField& uu, const GridField& g,
                   GridField& dr, GridField& du, GridField& dg) {
        GridField rpos = r;
        for (int i = 0; i < n; ++i) rpos[i] = std::max(rpos[i], 0.0);
        const GridField conv = kernels::periodic_convolve_fast(kernels::kernel_samples(psi), rpos);
        GridField ru = GridField::torus(n);
        for (int i = 0; i < n; ++i) ru[i] = rpos[i] * uu[i];
        const GridField convu = kernels::periodic_convolve_fast(kernels::kernel_samples(psi), ru);

        GridField phix = GridField::torus(n);
        if (k != 0.0) {
            GridField rc = GridField::torus(n);
            double mean = 0.0;
            for (int i = 0; i < n; ++i) mean += r[i];
            mean /= n;
            for (int i = 0; i < n; ++i) rc[i] = r[i] - mean;
            phix = poisson_periodic(rc);
        }

        const auto sr = limited_slopes(r);
        const auto su = limited_slopes(uu);
        const auto sg = limited_slopes(g);
        const auto div_r = conservative_divergence(r, sr, uu, su);
        const auto div_g = conservative_divergence(g, sg, uu, su);
        const auto uux = advective_term(uu, su, uu, su);

        dr = GridField::torus(n);
        du = GridField::torus(n);
        dg = GridField::torus(n);
        for (int i = 0; i < n; ++i) {
            dr[i] = -div_r.divergence[static_cast<size_t>(i)];
            dg[i] = -div_g.divergence[static_cast<size_t>(i)] + k * (r[i] - c);
            du[i] = -uux[static_cast<size_t>(i)] - k * phix[i] + (convu[i] - uu[i] * conv[i]);
        }
    };

    auto record_snapshot = [&](double t) {
        Snapshot s;
        s.t = t;
        s.rho = rho;
        s.u = u;
        s.e_fd = fd_e(u, rho);
        s.aux = G;
        const GridField conv = kernels::periodic_convolve_fast(kernels::kernel_samples(psi), rho);
        std::vector<double> ux = fft::periodic_derivative(u.values);
        double resid = 0.0;
        for (int i = 0; i < n; ++i)
            resid = std::max(resid, std::abs(ux[static_cast<size_t>(i)] - (G[i] - conv[i])));
        tl.g_residual.push_back(resid);
        tl.snap_t.push_back(t);
        tl.rho_min.push_back(rho.min());
        tl.rho_max.push_back(rho.max());
        tl.rhox_max.push_back(max_abs_derivative(rho));
        tl.g_min.push_back(G.min());
        tl.g_max.push_back(G.max());
        tl.snapshots.push_back(std::move(s));
    };

    tl.mass_initial = rho.mass();
    record_snapshot(0.0);
    record_series(tl.series, 0.0, G.max_abs(), max_abs_derivative(u), rho.min(), rho.max());

    double t = 0.0;
    long steps = 0;
    int next_snap = 1;
    double prev_mass = tl.mass_initial;
    detectors::Termination term = detectors::Termination::Completed;

    while (t < opt.T - 1e-14) {
        if (steps++ >= opt.max_steps) {
            term = detectors::Termination::Stopped;
            break;
        }
        // wave speed and source-rate limited step
        double speed = 0.0, rate = 0.0;
        {
            const GridField conv = kernels::periodic_convolve_fast(kernels::kernel_samples(psi), rho);
            for (int i = 0; i < n; ++i) {
                speed = std::max(speed, std::abs(u[i]));
                rate = std::max(rate, std::abs(G[i]) + std::abs(conv[i]) + std::abs(k));
            }
        }
        double dt = std::min(opt.dt_max, opt.cfl * h / std::max(speed, 1e-12));
        dt = std::min(dt, 0.25 / std::max(rate, 1e-12));
        dt = std::min(dt, opt.T - t);
        if (dt < 1e-14) {
            term = detectors::Termination::StepFloor;
            break;
        }

        GridField dr1, du1, dg1;
        rhs(rho, u, G, dr1, du1, dg1);
        GridField r1 = rho, u1 = u, g1 = G;
        for (int i = 0; i < n; ++i) {
            r1[i] += dt * dr1[i];
            u1[i] += dt * du1[i];
            g1[i] += dt * dg1[i];
        }
        clip_negative_density(r1, 1e-8 * std::max(1.0, tl.mass_initial), &negative_flagged);

        GridField dr2, du2, dg2;
        rhs(r1, u1, g1, dr2, du2, dg2);
        for (int i = 0; i < n; ++i) {
            rho[i] = 0.5 * (rho[i] + r1[i] + dt * dr2[i]);
            u[i] = 0.5 * (u[i] + u1[i] + dt * du2[i]);
            G[i] = 0.5 * (G[i] + g1[i] + dt * dg2[i]);
        }
        clip_negative_density(rho, 1e-8 * std::max(1.0, tl.mass_initial), &negative_flagged);
        t += dt;

        const double mass = rho.mass();
        tl.mass_drift_per_step_max =
            std::max(tl.mass_drift_per_step_max, std::abs(mass - prev_mass));
        prev_mass = mass;

        const double witness = G.max_abs();
        record_series(tl.series, t, witness, max_abs_derivative(u), rho.min(), rho.max());

        if (!all_finite(rho) || !all_finite(u) || !all_finite(G) ||
            witness >= opt.state_guard || rho.max() >= opt.state_guard) {
            term = detectors::Termination::GuardExceeded;
            tl.series.x_at_termination = G.x(argmax_abs(G));
            break;
        }
        while (next_snap <= opt.snapshots && t >= opt.T * next_snap / opt.snapshots - 1e-12) {
            record_snapshot(t);
            ++next_snap;
        }
    }
    if (term != detectors::Termination::Completed || tl.snap_t.back() < t - 1e-12)
        record_snapshot(t);
    if (negative_flagged)
        add_warning_once(tl.warnings, "negative density clipped beyond tolerance");

    tl.mass_final = rho.mass();
    tl.series.termination = term;
    tl.series.t_end = t;
    return tl;
}

// --- shared relaxation stepping -------------------------------------------

namespace {

struct RelaxFields {
    GridField rho, u, e;
    GridField rho_d;      // local flavor only
    GridField u_foot;     // advected initial velocity label (density bound)
    GridField numer;      // advected local numerator rho0 |f(u0)-u0|
};

// integral of 1/(f(xi)-xi) from a to b; integrand sign-definite in use
double path_integral(const VelocityLaw& law, double a, double b) {
    if (a == b) return 0.0;
    auto integrand = [&law](double xi) { return 1.0 / (law(0.0, xi) - xi); };
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, a, b, 8, 1e-10);
}

}  // namespace

FieldTimeline solve_relax_nonlocal(const GridField& rho0, const GridField& u0,
                                   const kernels::RelaxKernel& q,
                                   const SolveOptions& opt) {
    if (rho0.domain != Domain::Line || !same_domain(rho0, u0))
        throw std::invalid_argument("solve_relax_nonlocal: line fields on a shared grid required");
    if (rho0.min() < 0.0) throw std::invalid_argument("rho0 must be nonnegative");
    if (opt.cfl <= 0.0 || opt.cfl >= 1.0) throw std::invalid_argument("cfl must lie in (0,1)");

    const int n = rho0.n;
    const double h = rho0.h();

    // normalized convolution stencil: constant velocity reproduced exactly
    const int spread = std::max(1, static_cast<int>(std::ceil(q.support_radius / h)));
    std::vector<double> weights(static_cast<size_t>(2 * spread + 1));
    double wsum = 0.0;
    for (int m = -spread; m <= spread; ++m) {
        const double w = q.eval(m * h) * h;
        weights[static_cast<size_t>(m + spread)] = w;
        wsum += w;
    }
    for (double& w : weights) w /= wsum;

    auto velocity_average = [&](const GridField& uu) {
        GridField v = uu;  // copies far-field values
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int m = -spread; m <= spread; ++m)
                s += weights[static_cast<size_t>(m + spread)] * uu.at(i + m);
            v[i] = s;
        }
        return v;
    };

    FieldTimeline tl;
    tl.series.horizon = opt.T;

    RelaxFields S;
    S.rho = rho0;
    S.u = u0;
    S.e = fd_e(u0, rho0);

    // Breakdown witness: subcritical data keep e >= 0, so a dive of min e
    // well below its initial excursion is the grid-robust blowup signature
    // (the pointwise divergence itself gets smeared once the well narrows
    // to the cell scale).
    const double m_scale = std::max(S.rho.max(), S.e.max());
    const double e_floor =
        -(4.0 * std::max(0.0, -S.e.min()) + 0.25 * (1.0 + std::max(m_scale, 0.0)));

    bool negative_flagged = false;
    double last_boundary_left = 0.0, last_boundary_right = 0.0;

    auto rhs = [&](const RelaxFields& f, RelaxFields& d) {
        const GridField v = velocity_average(f.u);
        const auto sr = limited_slopes(f.rho);
        const auto su = limited_slopes(f.u);
        const auto se = limited_slopes(f.e);
        const auto sv = limited_slopes(v);
        const auto div_r = conservative_divergence(f.rho, sr, v, sv);
        const auto uux = advective_term(f.u, su, f.u, su);
        const auto uex = advective_term(f.e, se, f.u, su);

        d.rho = GridField::line(n, f.rho.half_length);
        d.u = d.rho;
        d.e = d.rho;
        for (int i = 0; i < n; ++i) {
            d.rho[i] = -div_r.divergence[static_cast<size_t>(i)];
            d.u[i] = -uux[static_cast<size_t>(i)] + f.rho[i] * (v[i] - f.u[i]);
            d.e[i] = -uex[static_cast<size_t>(i)] - f.e[i] * (f.e[i] - f.rho[i]);
        }
        last_boundary_left = div_r.boundary_left;
        last_boundary_right = div_r.boundary_right;
    };

    auto record_snapshot = [&](double t) {
        Snapshot s;
        s.t = t;
        s.rho = S.rho;
        s.u = S.u;
        s.e_fd = fd_e(S.u, S.rho);
        s.aux = velocity_average(S.u);
        tl.snap_t.push_back(t);
        tl.e_min.push_back(S.e.min());
        tl.e_max.push_back(S.e.max());
        tl.efd_min.push_back(s.e_fd.min());
        tl.efd_max.push_back(s.e_fd.max());
        double mism = 0.0;
        for (int i = 0; i < n; ++i) mism = std::max(mism, std::abs(S.e[i] - s.e_fd[i]));
        tl.e_mismatch.push_back(mism);
        tl.rho_min.push_back(S.rho.min());
        tl.rho_max.push_back(S.rho.max());
        tl.rhox_max.push_back(max_abs_derivative(S.rho));
        tl.snapshots.push_back(std::move(s));
    };

    tl.mass_initial = S.rho.mass();
    record_snapshot(0.0);
    record_series(tl.series, 0.0, std::max(0.0, -S.e.min()), max_abs_derivative(S.u),
                  S.rho.min(), S.rho.max());

    double t = 0.0;
    long steps = 0;
    int next_snap = 1;
    double prev_mass = tl.mass_initial;
    detectors::Termination term = detectors::Termination::Completed;

    while (t < opt.T - 1e-14) {
        if (steps++ >= opt.max_steps) {
            term = detectors::Termination::Stopped;
            break;
        }
        double speed = 0.0, rate = 0.0;
        for (int i = 0; i < n; ++i) {
            speed = std::max(speed, std::abs(S.u[i]));
            rate = std::max(rate, std::abs(S.e[i]) + S.rho[i]);
        }
        double dt = std::min(opt.dt_max, opt.cfl * h / std::max(speed, 1e-12));
        dt = std::min(dt, 0.25 / std::max(rate, 1e-12));
        dt = std::min(dt, opt.T - t);
        if (dt < 1e-14) {
            term = detectors::Termination::StepFloor;
            break;
        }

        RelaxFields d1;
        rhs(S, d1);
        const double bl1 = last_boundary_left, br1 = last_boundary_right;
        RelaxFields S1 = S;
        for (int i = 0; i < n; ++i) {
            S1.rho[i] += dt * d1.rho[i];
            S1.u[i] += dt * d1.u[i];
            S1.e[i] += dt * d1.e[i];
        }
        clip_negative_density(S1.rho, 1e-8 * std::max(1.0, tl.mass_initial), &negative_flagged);

        RelaxFields d2;
        rhs(S1, d2);
        const double bl2 = last_boundary_left, br2 = last_boundary_right;
        for (int i = 0; i < n; ++i) {
            S.rho[i] = 0.5 * (S.rho[i] + S1.rho[i] + dt * d2.rho[i]);
            S.u[i] = 0.5 * (S.u[i] + S1.u[i] + dt * d2.u[i]);
            S.e[i] = 0.5 * (S.e[i] + S1.e[i] + dt * d2.e[i]);
        }
        clip_negative_density(S.rho, 1e-8 * std::max(1.0, tl.mass_initial), &negative_flagged);
        t += dt;

        const double step_outflow = 0.5 * dt * ((br1 - bl1) + (br2 - bl2));
        tl.boundary_flux_total += step_outflow;
        const double mass = S.rho.mass();
        tl.mass_drift_per_step_max =
            std::max(tl.mass_drift_per_step_max, std::abs(mass - prev_mass + step_outflow));
        prev_mass = mass;

        const double e_min = S.e.min();
        const double witness = std::max(0.0, -e_min);
        record_series(tl.series, t, witness, max_abs_derivative(S.u), S.rho.min(), S.rho.max());

        if (!all_finite(S.rho) || !all_finite(S.u) || !all_finite(S.e) || e_min < e_floor ||
            S.e.max_abs() >= opt.state_guard) {
            term = detectors::Termination::GuardExceeded;
            int arg = 0;
            for (int i = 0; i < n; ++i)
                if (S.e[i] < S.e[arg]) arg = i;
            tl.series.x_at_termination = S.e.x(arg);
            break;
        }
        // perturbation reaching the boundary invalidates the line truncation
        if (std::abs(S.rho[0] - S.rho.far_left) > 1e-8 ||
            std::abs(S.rho[n - 1] - S.rho.far_right) > 1e-8 ||
            std::abs(S.u[0] - S.u.far_left) > 1e-8 ||
            std::abs(S.u[n - 1] - S.u.far_right) > 1e-8) {
            add_warning_once(tl.warnings, "window too small: perturbation reached the boundary");
        }
        while (next_snap <= opt.snapshots && t >= opt.T * next_snap / opt.snapshots - 1e-12) {
            record_snapshot(t);
            ++next_snap;
        }
    }
    if (term != detectors::Termination::Completed || tl.snap_t.back() < t - 1e-12)
        record_snapshot(t);
    if (negative_flagged)
        add_warning_once(tl.warnings, "negative density clipped beyond tolerance");

    tl.mass_final = S.rho.mass();
    tl.series.termination = term;
    tl.series.t_end = t;
    return tl;
}

FieldTimeline solve_relax_local(const GridField& rho0, const GridField& u0,
                                const VelocityLaw& law, const SolveOptions& opt) {
    if (rho0.domain != Domain::Line || !same_domain(rho0, u0))
        throw std::invalid_argument("solve_relax_local: line fields on a shared grid required");
    if (rho0.min() < 0.0) throw std::invalid_argument("rho0 must be nonnegative");
    if (opt.cfl <= 0.0 || opt.cfl >= 1.0) throw std::invalid_argument("cfl must lie in (0,1)");

    const int n = rho0.n;
    const double h = rho0.h();

    FieldTimeline tl;
    tl.series.horizon = opt.T;

    RelaxFields S;
    S.rho = rho0;
    S.u = u0;
    S.e = fd_e(u0, rho0);
    S.rho_d = rho0;

    const double m_scale = std::max(S.rho.max(), S.e.max());
    const double e_floor =
        -(4.0 * std::max(0.0, -S.e.min()) + 0.25 * (1.0 + std::max(m_scale, 0.0)));

    const bool track_bound = opt.track_density_bound && !law.depends_on_rho;
    double numer_global = 0.0;
    if (track_bound) {
        S.u_foot = u0;
        S.numer = rho0;
        for (int i = 0; i < n; ++i) {
            const double gap = std::abs(law(rho0[i], u0[i]) - u0[i]);
            S.numer[i] = rho0[i] * gap;
            numer_global = std::max(numer_global, S.numer[i]);
        }
        S.numer.far_left = rho0.far_left * std::abs(law(0.0, u0.far_left) - u0.far_left);
        S.numer.far_right = rho0.far_right * std::abs(law(0.0, u0.far_right) - u0.far_right);
        numer_global = std::max(numer_global, std::max(S.numer.far_left, S.numer.far_right));
    }

    bool negative_flagged = false;
    bool fu_flagged = false;
    double last_boundary_left = 0.0, last_boundary_right = 0.0;

    auto law_field = [&](const RelaxFields& f) {
        GridField v = GridField::line(n, f.rho.half_length);
        for (int i = 0; i < n; ++i) v[i] = law(f.rho[i], f.u[i]);
        v.far_left = law(f.rho.far_left, f.u.far_left);
        v.far_right = law(f.rho.far_right, f.u.far_right);
        return v;
    };

    auto rhs = [&](const RelaxFields& f, RelaxFields& d) {
        const GridField v = law_field(f);
        const auto sr = limited_slopes(f.rho);
        const auto su = limited_slopes(f.u);
        const auto se = limited_slopes(f.e);
        const auto sv = limited_slopes(v);
        const auto srd = limited_slopes(f.rho_d);

        // widen LLF dissipation to the first characteristic family f + rho f_rho
        auto extra = [&](int i) {
            const double lam1l = v.at(i) + f.rho.at(i) * law.frho(f.rho.at(i), f.u.at(i));
            const double lam1r =
                v.at(i + 1) + f.rho.at(i + 1) * law.frho(f.rho.at(i + 1), f.u.at(i + 1));
            return std::max(std::abs(lam1l), std::abs(lam1r));
        };
        const auto div_r = conservative_divergence(f.rho, sr, v, sv, extra);
        const auto uux = advective_term(f.u, su, f.u, su);
        const auto uex = advective_term(f.e, se, f.u, su);
        const auto frdx = advective_term(f.rho_d, srd, v, sv);

        d.rho = GridField::line(n, f.rho.half_length);
        d.u = d.rho;
        d.e = d.rho;
        d.rho_d = d.rho;
        for (int i = 0; i < n; ++i) {
            d.rho[i] = -div_r.divergence[static_cast<size_t>(i)];
            d.u[i] = -uux[static_cast<size_t>(i)] + f.rho[i] * (v[i] - f.u[i]);
            d.e[i] = -uex[static_cast<size_t>(i)] - f.e[i] * (f.e[i] - f.rho_d[i]);
            const double fu = law.fu(f.rho[i], f.u[i]);
            d.rho_d[i] = -frdx[static_cast<size_t>(i)] + fu * f.rho_d[i] * (f.rho_d[i] - f.e[i]);
        }
        // the spatially uniform far states feel the relaxation source too:
        // constant ghosts are not an equilibrium unless f(u_far) = u_far
        d.u.far_left = f.rho.far_left * (v.far_left - f.u.far_left);
        d.u.far_right = f.rho.far_right * (v.far_right - f.u.far_right);
        if (track_bound) {
            const auto sf = limited_slopes(f.u_foot);
            const auto sn = limited_slopes(f.numer);
            const auto adv_f = advective_term(f.u_foot, sf, f.u, su);
            const auto adv_n = advective_term(f.numer, sn, f.u, su);
            d.u_foot = d.rho;
            d.numer = d.rho;
            for (int i = 0; i < n; ++i) {
                d.u_foot[i] = -adv_f[static_cast<size_t>(i)];
                d.numer[i] = -adv_n[static_cast<size_t>(i)];
            }
        }
        last_boundary_left = div_r.boundary_left;
        last_boundary_right = div_r.boundary_right;
    };

    auto record_snapshot = [&](double t) {
        Snapshot s;
        s.t = t;
        s.rho = S.rho;
        s.u = S.u;
        s.e_fd = fd_e(S.u, S.rho);
        s.aux = S.e;
        tl.snap_t.push_back(t);
        tl.e_min.push_back(S.e.min());
        tl.e_max.push_back(S.e.max());
        tl.efd_min.push_back(s.e_fd.min());
        tl.efd_max.push_back(s.e_fd.max());
        double mism = 0.0, margin = 1e300, fumax = -1e300;
        for (int i = 0; i < n; ++i) {
            mism = std::max(mism, std::abs(S.e[i] - s.e_fd[i]));
            margin = std::min(margin, std::abs(law(S.rho[i], S.u[i]) - S.u[i]));
            fumax = std::max(fumax, law.fu(S.rho[i], S.u[i]));
        }
        tl.e_mismatch.push_back(mism);
        tl.hyp_margin.push_back(margin);
        tl.fu_max.push_back(fumax);
        tl.rho_min.push_back(S.rho.min());
        tl.rho_max.push_back(S.rho.max());
        tl.rhox_max.push_back(max_abs_derivative(S.rho));

        if (track_bound) {
            double ratio_g = 0.0, ratio_l = 0.0;
            for (int i = 0; i < n; ++i) {
                const double gap = std::abs(law(S.rho[i], S.u[i]) - S.u[i]);
                if (gap < 1e-12) {
                    add_warning_once(tl.warnings, "density bound skipped: hyperbolicity margin ~ 0");
                    continue;
                }
                const double I = path_integral(law, S.u_foot[i], S.u[i]);
                const double denom = std::exp(I) * gap;
                if (numer_global > 0.0)
                    ratio_g = std::max(ratio_g, S.rho[i] * denom / numer_global);
                if (S.numer[i] > 1e-300)
                    ratio_l = std::max(ratio_l, S.rho[i] * denom / S.numer[i]);
            }
            tl.density_ratio_global.push_back(ratio_g);
            tl.density_ratio_local.push_back(ratio_l);
        }
        tl.snapshots.push_back(std::move(s));
    };

    tl.mass_initial = S.rho.mass();
    record_snapshot(0.0);
    if (tl.hyp_margin.back() <= 0.0)
        add_warning_once(tl.warnings, "strict hyperbolicity fails at t = 0 (f(u) = u somewhere)");
    record_series(tl.series, 0.0, std::max(0.0, -S.e.min()), max_abs_derivative(S.u),
                  S.rho.min(), S.rho.max());

    double t = 0.0;
    long steps = 0;
    int next_snap = 1;
    double prev_mass = tl.mass_initial;
    detectors::Termination term = detectors::Termination::Completed;

    while (t < opt.T - 1e-14) {
        if (steps++ >= opt.max_steps) {
            term = detectors::Termination::Stopped;
            break;
        }
        double speed = 0.0, rate = 0.0;
        for (int i = 0; i < n; ++i) {
            const double fv = law(S.rho[i], S.u[i]);
            const double lam1 = fv + S.rho[i] * law.frho(S.rho[i], S.u[i]);
            speed = std::max({speed, std::abs(S.u[i]), std::abs(fv), std::abs(lam1)});
            rate = std::max(rate, std::abs(S.e[i]) + std::abs(S.rho_d[i]) + S.rho[i]);
            if (law.fu(S.rho[i], S.u[i]) > 1e-10) fu_flagged = true;
        }
        double dt = std::min(opt.dt_max, opt.cfl * h / std::max(speed, 1e-12));
        dt = std::min(dt, 0.25 / std::max(rate, 1e-12));
        dt = std::min(dt, opt.T - t);
        if (dt < 1e-14) {
            term = detectors::Termination::StepFloor;
            break;
        }

        RelaxFields d1;
        rhs(S, d1);
        const double bl1 = last_boundary_left, br1 = last_boundary_right;
        RelaxFields S1 = S;
        for (int i = 0; i < n; ++i) {
            S1.rho[i] += dt * d1.rho[i];
            S1.u[i] += dt * d1.u[i];
            S1.e[i] += dt * d1.e[i];
            S1.rho_d[i] += dt * d1.rho_d[i];
            if (track_bound) {
                S1.u_foot[i] += dt * d1.u_foot[i];
                S1.numer[i] += dt * d1.numer[i];
            }
        }
        S1.u.far_left += dt * d1.u.far_left;
        S1.u.far_right += dt * d1.u.far_right;
        clip_negative_density(S1.rho, 1e-8 * std::max(1.0, tl.mass_initial), &negative_flagged);

        RelaxFields d2;
        rhs(S1, d2);
        const double bl2 = last_boundary_left, br2 = last_boundary_right;
        for (int i = 0; i < n; ++i) {
            S.rho[i] = 0.5 * (S.rho[i] + S1.rho[i] + dt * d2.rho[i]);
            S.u[i] = 0.5 * (S.u[i] + S1.u[i] + dt * d2.u[i]);
            S.e[i] = 0.5 * (S.e[i] + S1.e[i] + dt * d2.e[i]);
            S.rho_d[i] = 0.5 * (S.rho_d[i] + S1.rho_d[i] + dt * d2.rho_d[i]);
            if (track_bound) {
                S.u_foot[i] = 0.5 * (S.u_foot[i] + S1.u_foot[i] + dt * d2.u_foot[i]);
                S.numer[i] = 0.5 * (S.numer[i] + S1.numer[i] + dt * d2.numer[i]);
            }
        }
        S.u.far_left = 0.5 * (S.u.far_left + S1.u.far_left + dt * d2.u.far_left);
        S.u.far_right = 0.5 * (S.u.far_right + S1.u.far_right + dt * d2.u.far_right);
        clip_negative_density(S.rho, 1e-8 * std::max(1.0, tl.mass_initial), &negative_flagged);
        t += dt;

        const double step_outflow = 0.5 * dt * ((br1 - bl1) + (br2 - bl2));
        tl.boundary_flux_total += step_outflow;
        const double mass = S.rho.mass();
        tl.mass_drift_per_step_max =
            std::max(tl.mass_drift_per_step_max, std::abs(mass - prev_mass + step_outflow));
        prev_mass = mass;

        const double e_min = S.e.min();
        const double witness = std::max(0.0, -e_min);
        record_series(tl.series, t, witness, max_abs_derivative(S.u), S.rho.min(), S.rho.max());

        if (!all_finite(S.rho) || !all_finite(S.u) || !all_finite(S.e) || !all_finite(S.rho_d) ||
            e_min < e_floor || std::max(S.e.max_abs(), S.rho_d.max_abs()) >= opt.state_guard) {
            term = detectors::Termination::GuardExceeded;
            int arg = 0;
            for (int i = 0; i < n; ++i)
                if (S.e[i] < S.e[arg]) arg = i;
            tl.series.x_at_termination = S.e.x(arg);
            break;
        }
        if (std::abs(S.rho[0] - S.rho.far_left) > 1e-8 ||
            std::abs(S.rho[n - 1] - S.rho.far_right) > 1e-8 ||
            std::abs(S.u[0] - S.u.far_left) > 1e-8 ||
            std::abs(S.u[n - 1] - S.u.far_right) > 1e-8) {
            add_warning_once(tl.warnings, "window too small: perturbation reached the boundary");
        }
        while (next_snap <= opt.snapshots && t >= opt.T * next_snap / opt.snapshots - 1e-12) {
            record_snapshot(t);
            ++next_snap;
        }
    }
    if (term != detectors::Termination::Completed || tl.snap_t.back() < t - 1e-12)
        record_snapshot(t);
    if (negative_flagged)
        add_warning_once(tl.warnings, "negative density clipped beyond tolerance");
    if (fu_flagged)
        add_warning_once(tl.warnings, "velocity law breach: f_u > 0 on the computed solution");

    tl.mass_final = S.rho.mass();
    tl.series.termination = term;
    tl.series.t_end = t;
    return tl;
}

}  // namespace ctlab::eulerian
