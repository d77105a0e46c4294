#include <doctest.h>

#include <cmath>

#include "ctlab/characteristics.hpp"
#include "ctlab/detectors.hpp"

using namespace ctlab;
using namespace ctlab::characteristics;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

// smooth kernel: a drifting steady state samples psi at off-node separations,
// where a jump kernel would flip edge samples on rounding
EPAEnsemble steady_ensemble(int m, double k, double ubar) {
    const kernels::InfluenceKernel psi = kernels::cosine_kernel(1.0, 0.5, m);
    return make_epa_ensemble([](double) { return 1.0; }, [ubar](double) { return ubar; },
                             [](double) { return 0.0; }, psi, k, m, m);
}

}  // namespace

TEST_SUITE("characteristics") {

TEST_CASE("closed form: identity at t = 0 and direct substitution") {
    const EPState s0 = ep_closed_form(2.0, -3.0, 0.0);
    CHECK(s0.rho == doctest::Approx(2.0));
    CHECK(s0.g == doctest::Approx(-3.0));

    // q(1) = 0.5 + 0 + 0.5 = 1 -> rho 1, g = rho (t + g0/rho0) = 1
    const EPState s1 = ep_closed_form(2.0, 0.0, 1.0);
    CHECK(s1.rho == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s1.g == doctest::Approx(1.0).epsilon(1e-14));

    // q(2) = 2 + 2 + 1 = 5 -> rho 0.2, g = 0.2 * 3 = 0.6
    const EPState s2 = ep_closed_form(1.0, 1.0, 2.0);
    CHECK(s2.rho == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(s2.g == doctest::Approx(0.6).epsilon(1e-14));
}

TEST_CASE("closed form throws where the quadratic is nonpositive") {
    // (2, -2) has a double root at t = 1
    CHECK_THROWS_AS(ep_closed_form(2.0, -2.0, 1.0), std::domain_error);
    CHECK_NOTHROW(ep_closed_form(2.0, -2.0, 0.9));
    // (2, -3): q < 0 strictly between the two roots
    CHECK_THROWS_AS(ep_closed_form(2.0, -3.0, 1.0), std::domain_error);
}

TEST_CASE("breakdown time: quadratic-root oracle values") {
    CHECK_FALSE(ep_blowup_time(1.0, 0.0).has_value());
    CHECK_FALSE(ep_blowup_time(1.0, 5.0).has_value());
    // slightly above the threshold curve: no root
    CHECK_FALSE(ep_blowup_time(2.0, -2.0 * (1.0 - 1e-12)).has_value());

    auto t_double = ep_blowup_time(2.0, -2.0);
    REQUIRE(t_double.has_value());
    CHECK(*t_double == doctest::Approx(1.0).epsilon(1e-12));

    auto t_super = ep_blowup_time(2.0, -3.0);
    REQUIRE(t_super.has_value());
    CHECK(*t_super == doctest::Approx((3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-13));

    auto t_deep = ep_blowup_time(1.0, -2.0);
    REQUIRE(t_deep.has_value());
    CHECK(*t_deep == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-13));
}

TEST_CASE("integrator matches the closed form to 1e-8 at dt = 1e-3") {
    const CharTrajectory traj = integrate_ep(2.0, 0.0, 1.0, 1e-3);
    CHECK(traj.series.termination == detectors::Termination::Completed);
    const EPState& last = traj.states.back();
    const EPState exact = ep_closed_form(2.0, 0.0, last.t);
    CHECK(rel_err(last.rho, exact.rho) < 1e-8);
    CHECK(rel_err(last.g, exact.g) < 1e-8);
}

TEST_CASE("supercritical trajectory terminates with a breakdown estimate within 2%") {
    const CharTrajectory traj = integrate_ep(1.0, -2.0, 2.0, 1e-3);
    CHECK(traj.series.termination != detectors::Termination::Completed);
    const auto out = detectors::classify(traj.series, detectors::kStateGuard);
    CHECK(out.kind == detectors::OutcomeKind::Blowup);
    const double t_star = 2.0 - std::sqrt(2.0);  // quadratic-root oracle
    CHECK(std::abs(out.t_c_estimate - t_star) / t_star < 0.02);
}

TEST_CASE("strong expansion decays without breakdown") {
    const CharTrajectory traj = integrate_ep(1.0, 5.0, 10.0, 1e-3);
    CHECK(traj.series.termination == detectors::Termination::Completed);
    const EPState& last = traj.states.back();
    CHECK(last.rho < 0.05);
    CHECK(last.g > 0.0);
    for (size_t i = 1; i < traj.states.size(); ++i)
        CHECK(traj.states[i].rho <= traj.states[i - 1].rho + 1e-14);
}

TEST_CASE("integrator rejects invalid arguments") {
    CHECK_THROWS(integrate_ep(1.0, 0.0, 1.0, -1e-3));
    CHECK_THROWS(integrate_ep(1.0, 0.0, 1.0, 0.0));
    CHECK_THROWS(integrate_ep(0.0, 0.0, 1.0, 1e-3));  // rho0 must be positive
    CHECK_THROWS(integrate_ep(1.0, 0.0, -1.0, 1e-3));
}

TEST_CASE("accepted steps preserve density positivity") {
    for (double g0 : {-1.0, 0.0, 2.0}) {
        const CharTrajectory traj = integrate_ep(0.3, g0, 5.0, 1e-3);
        for (const auto& s : traj.states) CHECK(s.rho > 0.0);
    }
}

TEST_CASE("halving dt reduces closed-form error at fourth order") {
    auto err = [](double dt) {
        const CharTrajectory traj = integrate_ep(2.0, 0.0, 1.0, dt);
        const EPState& last = traj.states.back();
        const EPState exact = ep_closed_form(2.0, 0.0, last.t);
        return std::max(rel_err(last.rho, exact.rho), rel_err(last.g, exact.g));
    };
    const double e1 = err(4e-3), e2 = err(2e-3);
    CHECK(e1 / e2 >= 8.0);
}

TEST_CASE("breakdown time is monotone in g0 below the threshold") {
    const double rho0 = 1.0;
    double prev = 0.0;
    for (double g0 : {-4.0, -3.0, -2.0, -std::sqrt(2.0 * rho0)}) {
        const auto t = ep_blowup_time(rho0, g0);
        REQUIRE(t.has_value());
        CHECK(*t >= prev);
        prev = *t;
    }
}

TEST_CASE("ensemble construction conserves mass and validates weights") {
    const EPAEnsemble e = steady_ensemble(64, 0.5, 0.0);
    CHECK(e.params.c == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.total_mass() == doctest::Approx(e.params.c));

    EPAEnsemble bad = e;
    bad.params.c = 2.0;  // weights no longer sum to c
    EnsembleOptions opt;
    opt.T = 0.1;
    opt.dt = 1e-2;
    CHECK_THROWS(integrate_epa_ensemble(bad, opt));
}

TEST_CASE("steady state is preserved by the particle integrator") {
    for (double ubar : {0.0, 0.3}) {
        const EPAEnsemble e = steady_ensemble(64, 0.5, ubar);
        EnsembleOptions opt;
        opt.T = 0.5;
        opt.dt = 1e-3;
        opt.snapshots = 5;
        const EnsembleTrajectory traj = integrate_epa_ensemble(e, opt);
        CHECK(traj.series.termination == detectors::Termination::Completed);
        const EnsembleSnapshot& last = traj.snapshots.back();
        for (int i = 0; i < 64; ++i) {
            CHECK(std::abs(last.rho[i] - e.rho[i]) < 1e-12);
            CHECK(std::abs(last.G[i] - e.G[i]) < 1e-12);
            CHECK(std::abs(last.u[i] - ubar) < 1e-12);
        }
        // mass weights are never mutated
        for (int i = 0; i < 64; ++i) CHECK(traj.mass[i] == e.mass[i]);
    }
}

TEST_CASE("alignment-only ensemble conserves momentum to 1e-8 per unit time") {
    const int m = 96;
    const kernels::InfluenceKernel psi = kernels::triangle_kernel(1.0, 0.3, m);
    const EPAEnsemble e = make_epa_ensemble(
        [](double a) { return 1.0 + 0.2 * std::sin(2.0 * M_PI * a); },
        [](double a) { return 0.1 * std::cos(2.0 * M_PI * a); },
        [](double a) { return -0.2 * M_PI * std::sin(2.0 * M_PI * a); }, psi, 0.0, m, m);
    EnsembleOptions opt;
    opt.T = 2.0;
    opt.dt = 2e-3;
    const EnsembleTrajectory traj = integrate_epa_ensemble(e, opt);
    CHECK(traj.series.termination == detectors::Termination::Completed);
    CHECK(std::abs(traj.momentum.back() - traj.momentum.front()) < 1e-8 * opt.T);
}

TEST_CASE("alignment-only run with uniformly positive G stays bounded") {
    const int m = 96;
    // weakly singular influence, scaled so the discrete c ||psi|| is ~ 0.5
    kernels::L1Kernel raw = kernels::power_singular_kernel(0.25, 0.5, m);
    const double scale = 0.5 / raw.l1_norm;
    kernels::L1Kernel psi = kernels::power_singular_kernel(0.25 * scale, 0.5, m);
    const kernels::InfluenceKernel kv = psi;

    const EPAEnsemble e = make_epa_ensemble(
        [](double a) { return 1.0 + 0.1 * std::sin(2.0 * M_PI * a); },
        [](double) { return 0.0; }, [](double) { return 0.0; }, kv, 0.0, m, m,
        std::function<double(double)>([](double) { return 0.5; }));
    for (double g : e.G) CHECK(g == 0.5);

    EnsembleOptions opt;
    opt.T = 10.0;
    opt.dt = 2e-3;
    opt.snapshots = 20;
    const EnsembleTrajectory traj = integrate_epa_ensemble(e, opt);
    CHECK(traj.series.termination == detectors::Termination::Completed);
    double rho_max = 0.0, g_max = 0.0, g_min = 1e300;
    for (const auto& snap : traj.snapshots) {
        for (double r : snap.rho) rho_max = std::max(rho_max, r);
        for (double g : snap.G) {
            g_max = std::max(g_max, g);
            g_min = std::min(g_min, g);
        }
    }
    CHECK(rho_max < 10.0);
    CHECK(g_max < 10.0);
    CHECK(g_min > 0.0);  // positivity of G persists
}

TEST_CASE("supercritical ensemble flags a crossing") {
    const int m = 64;
    const kernels::InfluenceKernel psi = kernels::constant_kernel(0.1, m);
    const EPAEnsemble e = make_epa_ensemble(
        [](double) { return 1.0; },
        [](double a) { return -2.0 * std::sin(2.0 * M_PI * a); },
        [](double a) { return -4.0 * M_PI * std::cos(2.0 * M_PI * a); }, psi, 0.5, m, m);
    EnsembleOptions opt;
    opt.T = 3.0;
    opt.dt = 1e-3;
    const EnsembleTrajectory traj = integrate_epa_ensemble(e, opt);
    CHECK((traj.series.termination == detectors::Termination::ParticleCrossing ||
           traj.series.termination == detectors::Termination::StepFloor));
    const auto out = detectors::classify(traj.series, detectors::kStateGuard);
    CHECK(out.kind == detectors::OutcomeKind::Blowup);
}

TEST_CASE("smooth ensemble keeps the velocity-gradient relation consistent") {
    const int m = 256;
    const kernels::InfluenceKernel psi = kernels::cosine_kernel(1.75, 0.25, m);
    const EPAEnsemble e = make_epa_ensemble(
        [](double a) { return 1.0 + 0.01 * std::sin(2.0 * M_PI * a); },
        [](double a) { return 0.01 * std::sin(2.0 * M_PI * a); },
        [](double a) { return 0.02 * M_PI * std::cos(2.0 * M_PI * a); }, psi, 0.5, m, m);
    EnsembleOptions opt;
    opt.T = 1.0;
    opt.dt = 1e-3;
    opt.snapshots = 10;
    const EnsembleTrajectory traj = integrate_epa_ensemble(e, opt);
    CHECK(traj.series.termination == detectors::Termination::Completed);
    for (double r : traj.consistency_residual) CHECK(r < 5e-3);
}

}  // TEST_SUITE
