#include "ctlab/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctlab/eulerian.hpp"

namespace ctlab::characteristics {

EPState ep_closed_form(double rho0, double g0, double t) {
    if (rho0 <= 0.0) throw std::invalid_argument("ep_closed_form: rho0 must be positive");
    if (t < 0.0) throw std::invalid_argument("ep_closed_form: t must be nonnegative");
    const double q = 0.5 * t * t + t * g0 / rho0 + 1.0 / rho0;
    if (q <= 0.0) throw std::domain_error("ep_closed_form: past the breakdown time");
    EPState s;
    s.t = t;
    s.rho = 1.0 / q;
    s.g = s.rho * (t + g0 / rho0);  // from d/dt(1/rho) = g/rho
    return s;
}

std::optional<double> ep_blowup_time(double rho0, double g0) {
    if (rho0 <= 0.0) throw std::invalid_argument("ep_blowup_time: rho0 must be positive");
    if (g0 >= 0.0) return std::nullopt;
    const double b = g0 / rho0;
    const double disc = b * b - 2.0 / rho0;
    if (disc < 0.0) return std::nullopt;
    // smaller positive root of t^2 + 2bt + 2/rho0, in the cancellation-safe form
    return (2.0 / rho0) / (-b + std::sqrt(disc));
}

CharTrajectory integrate_ep(double rho0, double g0, double T, double dt) {
    if (rho0 <= 0.0) throw std::invalid_argument("integrate_ep: rho0 must be positive");
    if (dt <= 0.0) throw std::invalid_argument("integrate_ep: dt must be positive");
    if (T < 0.0) throw std::invalid_argument("integrate_ep: T must be nonnegative");

    CharTrajectory traj;
    traj.series.horizon = T;

    auto frho = [](double r, double g) { return -r * g; };
    auto fg = [](double r, double g) { return -g * g + r; };

    double rho = rho0, g = g0, t = 0.0;
    double step = dt;
    const double floor = dt * std::pow(2.0, -40);

    auto push = [&]() {
        traj.states.push_back({rho, g, t});
        const double witness = std::max(std::abs(g), rho);
        traj.series.t.push_back(t);
        traj.series.witness.push_back(witness);
        traj.series.max_ux.push_back(std::abs(g));
        traj.series.min_rho.push_back(rho);
        traj.series.max_rho.push_back(rho);
    };
    push();

    detectors::Termination term = detectors::Termination::Completed;
    while (t < T - 1e-14) {
        const double hstep = std::min(step, T - t);

        const double k1r = frho(rho, g), k1g = fg(rho, g);
        const double k2r = frho(rho + 0.5 * hstep * k1r, g + 0.5 * hstep * k1g);
        const double k2g = fg(rho + 0.5 * hstep * k1r, g + 0.5 * hstep * k1g);
        const double k3r = frho(rho + 0.5 * hstep * k2r, g + 0.5 * hstep * k2g);
        const double k3g = fg(rho + 0.5 * hstep * k2r, g + 0.5 * hstep * k2g);
        const double k4r = frho(rho + hstep * k3r, g + hstep * k3g);
        const double k4g = fg(rho + hstep * k3r, g + hstep * k3g);
        const double rho_new = rho + hstep / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        const double g_new = g + hstep / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);

        const bool reject = !std::isfinite(rho_new) || !std::isfinite(g_new) || rho_new <= 0.0 ||
                            std::abs(g_new) >= detectors::kStateGuard ||
                            rho_new >= detectors::kStateGuard;
        if (reject) {
            step *= 0.5;
            if (step < floor) {
                term = (std::max(std::abs(g), rho) > 1e3)
                           ? detectors::Termination::StepFloor
                           : detectors::Termination::Stopped;
                break;
            }
            continue;
        }
        rho = rho_new;
        g = g_new;
        t += hstep;
        push();
        if (std::max(std::abs(g), rho) >= detectors::kStateGuard) {
            term = detectors::Termination::GuardExceeded;
            break;
        }
    }
    traj.series.termination = term;
    traj.series.t_end = t;
    return traj;
}

// --- EPA particle ensemble --------------------------------------------------

double EPAEnsemble::total_mass() const {
    double s = 0.0;
    for (double m : mass) s += m;
    return s;
}

double EPAEnsemble::total_momentum() const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += mass[i] * u[i];
    return s;
}

namespace {

// kernel value at a particle separation, with the singular cell regularized
// at the inter-particle scale
double psi_between(const kernels::InfluenceKernel& k, double dx, double cell) {
    const double d = torus_wrap(dx);
    if (std::abs(d) < 0.5 * cell) return kernels::kernel_zero_value(k, cell);
    return kernels::kernel_value(k, d);
}

struct EnsembleState {
    std::vector<double> x, u, rho, G;
};

}  // namespace

EPAEnsemble make_epa_ensemble(const std::function<double(double)>& rho0,
                              const std::function<double(double)>& u0,
                              const std::function<double(double)>& u0x,
                              const kernels::InfluenceKernel& kernel,
                              double k, int particles, int poisson_grid,
                              const std::optional<std::function<double(double)>>& g0_override) {
    if (particles < 4) throw std::invalid_argument("make_epa_ensemble: too few particles");
    EPAEnsemble e;
    e.kernel = kernel;
    e.poisson_grid = poisson_grid;
    const double h = 1.0 / particles;
    e.alpha.resize(particles);
    e.x.resize(particles);
    e.u.resize(particles);
    e.rho.resize(particles);
    e.G.resize(particles);
    e.mass.resize(particles);
    for (int i = 0; i < particles; ++i) {
        const double a = -0.5 + i * h;
        e.alpha[i] = a;
        e.x[i] = a;
        e.u[i] = u0(a);
        e.rho[i] = rho0(a);
        if (e.rho[i] < 0.0) throw std::invalid_argument("make_epa_ensemble: negative density");
        e.mass[i] = e.rho[i] * h;
    }
    e.params.k = k;
    e.params.c = e.total_mass();  // background equals the discrete mass
    for (int i = 0; i < particles; ++i) {
        if (g0_override) {
            e.G[i] = (*g0_override)(e.alpha[i]);
        } else {
            double conv = 0.0;
            for (int j = 0; j < particles; ++j)
                conv += psi_between(kernel, e.x[i] - e.x[j], h) * e.mass[j];
            e.G[i] = u0x(e.alpha[i]) + conv;
        }
    }
    return e;
}

EnsembleTrajectory integrate_epa_ensemble(const EPAEnsemble& init, const EnsembleOptions& opt) {
    const int m = init.size();
    if (m < 4) throw std::invalid_argument("integrate_epa_ensemble: too few particles");
    if (opt.dt <= 0.0) throw std::invalid_argument("integrate_epa_ensemble: dt must be positive");
    if (std::abs(init.total_mass() - init.params.c) >
        1e-10 * std::max(1.0, std::abs(init.params.c)))
        throw std::invalid_argument("integrate_epa_ensemble: mass weights inconsistent with c");

    const double cell = 1.0 / m;
    const double k = init.params.k;
    const double c = init.params.c;
    const bool need_poisson = k != 0.0;
    const int ng = init.poisson_grid > 0 ? init.poisson_grid : m;

    EnsembleTrajectory traj;
    traj.alpha = init.alpha;
    traj.mass = init.mass;
    traj.series.horizon = opt.T;

    EnsembleState S{init.x, init.u, init.rho, init.G};

    // deposit particle masses to the torus grid with area weighting, then
    // solve for the electric force and interpolate it back
    GridField phix = GridField::torus(ng);
    auto electric_force = [&](const std::vector<double>& xs, std::vector<double>& force) {
        GridField dens = GridField::torus(ng);
        const double hg = dens.h();
        for (int i = 0; i < m; ++i) {
            const double s = (torus_wrap(xs[i]) + 0.5) / hg;
            int i0 = static_cast<int>(std::floor(s));
            const double w = s - i0;
            if (i0 >= ng) i0 -= ng;
            dens[i0 % ng] += init.mass[i] * (1.0 - w) / hg;
            dens[(i0 + 1) % ng] += init.mass[i] * w / hg;
        }
        double mean = 0.0;
        for (int i = 0; i < ng; ++i) mean += dens[i];
        mean /= ng;
        for (int i = 0; i < ng; ++i) dens[i] -= mean;
        phix = eulerian::poisson_periodic(dens);
        for (int i = 0; i < m; ++i) {
            const double s = (torus_wrap(xs[i]) + 0.5) / hg;
            int i0 = static_cast<int>(std::floor(s));
            const double w = s - i0;
            if (i0 >= ng) i0 -= ng;
            force[static_cast<size_t>(i)] = (1.0 - w) * phix[i0 % ng] + w * phix[(i0 + 1) % ng];
        }
    };

    std::vector<double> ef(static_cast<size_t>(m), 0.0);
    auto rhs = [&](const EnsembleState& s, EnsembleState& d) {
        d.x.assign(static_cast<size_t>(m), 0.0);
        d.u.assign(static_cast<size_t>(m), 0.0);
        d.rho.assign(static_cast<size_t>(m), 0.0);
        d.G.assign(static_cast<size_t>(m), 0.0);
        if (need_poisson) electric_force(s.x, ef);
        for (int i = 0; i < m; ++i) {
            double conv = 0.0, align = 0.0;
            for (int j = 0; j < m; ++j) {
                const double w = psi_between(init.kernel, s.x[i] - s.x[j], cell) * init.mass[j];
                conv += w;
                align += w * (s.u[j] - s.u[i]);
            }
            d.x[i] = s.u[i];
            d.u[i] = align - (need_poisson ? k * ef[static_cast<size_t>(i)] : 0.0);
            d.rho[i] = -s.rho[i] * (s.G[i] - conv);
            d.G[i] = -s.G[i] * (s.G[i] - conv) + k * (s.rho[i] - c);
        }
    };

    auto order_intact = [&](const std::vector<double>& xs) {
        for (int i = 0; i + 1 < m; ++i)
            if (!(xs[i + 1] > xs[i])) return false;
        return xs[0] + 1.0 > xs[static_cast<size_t>(m - 1)];
    };

    auto record_snapshot = [&](double t) {
        EnsembleSnapshot snap;
        snap.t = t;
        snap.x = S.x;
        snap.u = S.u;
        snap.rho = S.rho;
        snap.G = S.G;
        // neighbor finite differences for the G-relation residual
        double resid = 0.0;
        for (int i = 0; i < m; ++i) {
            const int ip = (i + 1) % m, im = (i - 1 + m) % m;
            double gap = S.x[ip] - S.x[im];
            if (ip < i) gap += 1.0;
            if (im > i) gap += 1.0;
            if (gap <= 0.0) continue;
            const double ux = (S.u[ip] - S.u[im]) / gap;
            double conv = 0.0;
            for (int j = 0; j < m; ++j)
                conv += psi_between(init.kernel, S.x[i] - S.x[j], cell) * init.mass[j];
            resid = std::max(resid, std::abs(ux - (S.G[i] - conv)));
        }
        traj.consistency_residual.push_back(resid);
        double mom = 0.0;
        for (int i = 0; i < m; ++i) mom += init.mass[i] * S.u[i];
        traj.momentum.push_back(mom);
        traj.snapshots.push_back(std::move(snap));
    };

    auto series_sample = [&](double t) {
        double wit = 0.0, maxux = 0.0, rmin = S.rho[0], rmax = S.rho[0];
        for (int i = 0; i < m; ++i) {
            wit = std::max(wit, std::abs(S.G[i]));
            rmin = std::min(rmin, S.rho[i]);
            rmax = std::max(rmax, S.rho[i]);
            const int ip = (i + 1) % m;
            double gap = S.x[ip] - S.x[i];
            if (ip < i) gap += 1.0;
            if (gap > 1e-300) maxux = std::max(maxux, std::abs((S.u[ip] - S.u[i]) / gap));
        }
        traj.series.t.push_back(t);
        traj.series.witness.push_back(wit);
        traj.series.max_ux.push_back(maxux);
        traj.series.min_rho.push_back(rmin);
        traj.series.max_rho.push_back(rmax);
    };

    record_snapshot(0.0);
    series_sample(0.0);

    double t = 0.0;
    double step = opt.dt;
    const double floor = opt.dt * std::pow(2.0, -40);
    int next_snap = 1;
    detectors::Termination term = detectors::Termination::Completed;

    EnsembleState k1, k2, k3, k4, tmp;
    auto axpy = [&](const EnsembleState& s, const EnsembleState& d, double a, EnsembleState& out) {
        out.x.resize(static_cast<size_t>(m));
        out.u.resize(static_cast<size_t>(m));
        out.rho.resize(static_cast<size_t>(m));
        out.G.resize(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) {
            out.x[i] = s.x[i] + a * d.x[i];
            out.u[i] = s.u[i] + a * d.u[i];
            out.rho[i] = s.rho[i] + a * d.rho[i];
            out.G[i] = s.G[i] + a * d.G[i];
        }
    };

    while (t < opt.T - 1e-14) {
        const double hstep = std::min(step, opt.T - t);
        rhs(S, k1);
        axpy(S, k1, 0.5 * hstep, tmp);
        rhs(tmp, k2);
        axpy(S, k2, 0.5 * hstep, tmp);
        rhs(tmp, k3);
        axpy(S, k3, hstep, tmp);
        rhs(tmp, k4);

        EnsembleState next;
        next.x.resize(static_cast<size_t>(m));
        next.u.resize(static_cast<size_t>(m));
        next.rho.resize(static_cast<size_t>(m));
        next.G.resize(static_cast<size_t>(m));
        bool finite = true;
        double wit = 0.0;
        for (int i = 0; i < m; ++i) {
            next.x[i] = S.x[i] + hstep / 6.0 * (k1.x[i] + 2 * k2.x[i] + 2 * k3.x[i] + k4.x[i]);
            next.u[i] = S.u[i] + hstep / 6.0 * (k1.u[i] + 2 * k2.u[i] + 2 * k3.u[i] + k4.u[i]);
            next.rho[i] =
                S.rho[i] + hstep / 6.0 * (k1.rho[i] + 2 * k2.rho[i] + 2 * k3.rho[i] + k4.rho[i]);
            next.G[i] = S.G[i] + hstep / 6.0 * (k1.G[i] + 2 * k2.G[i] + 2 * k3.G[i] + k4.G[i]);
            finite = finite && std::isfinite(next.x[i]) && std::isfinite(next.u[i]) &&
                     std::isfinite(next.rho[i]) && std::isfinite(next.G[i]);
            wit = std::max(wit, std::max(std::abs(next.G[i]), next.rho[i]));
        }

        if (!finite || wit >= opt.state_guard) {
            step *= 0.5;
            if (step < floor) {
                term = detectors::Termination::StepFloor;
                break;
            }
            continue;
        }
        S = std::move(next);
        t += hstep;
        series_sample(t);

        if (!order_intact(S.x)) {
            term = detectors::Termination::ParticleCrossing;
            // worst gap location
            double worst = 1e300;
            int arg = 0;
            for (int i = 0; i + 1 < m; ++i) {
                const double gap = S.x[i + 1] - S.x[i];
                if (gap < worst) {
                    worst = gap;
                    arg = i;
                }
            }
            traj.series.x_at_termination = torus_wrap(S.x[arg]);
            break;
        }
        while (next_snap <= opt.snapshots && t >= opt.T * next_snap / opt.snapshots - 1e-12) {
            record_snapshot(t);
            ++next_snap;
        }
    }
    if (traj.snapshots.back().t < t - 1e-12 || term != detectors::Termination::Completed)
        record_snapshot(t);

    traj.series.termination = term;
    traj.series.t_end = t;
    return traj;
}

}  // namespace ctlab::characteristics
