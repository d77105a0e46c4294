#include "ctlab/families.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "ctlab/fft.hpp"

namespace ctlab::families {

namespace {

InitialData point_family(const FamilySpec& spec) {
    InitialData d;
    d.name = "point@1";
    d.is_point = true;
    d.point_rho0 = spec.get("rho0", 1.0);
    d.point_g0 = spec.get("g0", 0.0);
    d.rho0 = [v = d.point_rho0](double) { return v; };
    d.u0 = [](double) { return 0.0; };
    d.u0x = [v = d.point_g0](double) { return v; };
    return d;
}

InitialData steady_state_family(const FamilySpec& spec, double c) {
    InitialData d;
    d.name = "steady-state@1";
    const double ubar = spec.get("ubar", 0.0);
    d.rho0 = [c](double) { return c; };
    d.u0 = [ubar](double) { return ubar; };
    d.u0x = [](double) { return 0.0; };
    return d;
}

InitialData sine_family(const FamilySpec& spec, double c) {
    InitialData d;
    d.name = "sine-perturbation@1";
    const double amp = spec.get("amplitude", 0.01);
    const double uamp = spec.get("u_amplitude", 0.0);
    const int modes = static_cast<int>(spec.get("modes", 1.0));
    const double ubar = spec.get("ubar", 0.0);
    const bool random_phases = spec.get("random_phases", 0.0) != 0.0;
    if (modes < 1) throw std::invalid_argument("sine-perturbation: modes must be >= 1");

    std::vector<double> phases(static_cast<size_t>(modes), spec.get("phase", 0.0));
    if (random_phases) {
        std::mt19937_64 rng(spec.seed);
        std::uniform_real_distribution<double> dist(0.0, 2.0 * M_PI);
        for (auto& p : phases) p = dist(rng);
    }

    auto wave = [phases](double x, int m0) {
        double s = 0.0;
        for (size_t m = 0; m < phases.size(); ++m)
            s += std::sin(2.0 * M_PI * (m0 + static_cast<int>(m)) * x + phases[m]) /
                 static_cast<double>(m + 1);
        return s;
    };
    auto wave_x = [phases](double x, int m0) {
        double s = 0.0;
        for (size_t m = 0; m < phases.size(); ++m) {
            const double freq = 2.0 * M_PI * (m0 + static_cast<int>(m));
            s += freq * std::cos(freq * x + phases[m]) / static_cast<double>(m + 1);
        }
        return s;
    };

    d.rho0 = [c, amp, wave](double x) { return c * (1.0 + amp * wave(x, 1)); };
    d.u0 = [ubar, uamp, wave](double x) { return ubar + uamp * wave(x, 1); };
    d.u0x = [uamp, wave_x](double x) { return uamp * wave_x(x, 1); };
    return d;
}

InitialData gaussian_dip_family(const FamilySpec& spec) {
    InitialData d;
    d.name = "gaussian-dip@1";
    const double u_far = spec.get("u_far", 0.5);
    const double depth = spec.get("dip_depth", 0.2);
    const double width = spec.get("dip_width", 0.5);
    const double rho_far = spec.get("rho_far", 0.5);
    const double rho_amp = spec.get("rho_amp", 0.0);
    const double rho_width = spec.get("rho_width", width);
    if (width <= 0.0 || rho_width <= 0.0)
        throw std::invalid_argument("gaussian-dip: widths must be positive");

    d.rho0 = [rho_far, rho_amp, rho_width](double x) {
        return rho_far + rho_amp * std::exp(-(x / rho_width) * (x / rho_width));
    };
    d.u0 = [u_far, depth, width](double x) {
        return u_far - depth * std::exp(-(x / width) * (x / width));
    };
    d.u0x = [depth, width](double x) {
        return depth * (2.0 * x / (width * width)) * std::exp(-(x / width) * (x / width));
    };
    return d;
}

// G0 pinned to the discrete mean of psi*rho0, which makes u0x = G0 - psi*rho0
// a zero-mean torus field; u0 is its spectral antiderivative plus ubar.
InitialData ea_uniform_g_family(const FamilySpec& spec, double c,
                                const kernels::InfluenceKernel* kernel, int grid_n) {
    if (kernel == nullptr || grid_n < 4)
        throw std::invalid_argument("ea-uniform-g: needs an alignment kernel and a grid");
    InitialData d;
    d.name = "ea-uniform-g@1";
    const double amp = spec.get("amplitude", 0.01);
    const int modes = static_cast<int>(spec.get("modes", 1.0));
    const double ubar = spec.get("ubar", 0.0);

    auto rho0 = [c, amp, modes](double x) {
        return c * (1.0 + amp * std::sin(2.0 * M_PI * modes * x));
    };

    GridField rho = GridField::torus(grid_n);
    for (int i = 0; i < grid_n; ++i) rho[i] = rho0(rho.x(i));
    const GridField conv = kernels::periodic_convolve_fast(kernels::kernel_samples(*kernel), rho);
    double g0 = 0.0;
    for (int i = 0; i < grid_n; ++i) g0 += conv[i];
    g0 /= grid_n;

    std::vector<double> ux(static_cast<size_t>(grid_n));
    for (int i = 0; i < grid_n; ++i) ux[static_cast<size_t>(i)] = g0 - conv[i];
    const std::vector<double> u = fft::periodic_antiderivative(ux);

    // closures backed by linear interpolation of the constructed grid data
    const double h = rho.h();
    auto interp = [h, grid_n](const std::vector<double>& v, double x) {
        const double s = (torus_wrap(x) + 0.5) / h;
        int i0 = static_cast<int>(std::floor(s));
        const double w = s - i0;
        i0 %= grid_n;
        if (i0 < 0) i0 += grid_n;
        return (1.0 - w) * v[static_cast<size_t>(i0)] +
               w * v[static_cast<size_t>((i0 + 1) % grid_n)];
    };

    d.rho0 = rho0;
    d.u0 = [interp, u, ubar](double x) { return ubar + interp(u, x); };
    d.u0x = [interp, ux](double x) { return interp(ux, x); };
    d.g0_override = [g0](double) { return g0; };
    return d;
}

}  // namespace

InitialData build_family(const FamilySpec& spec, double c,
                         const kernels::InfluenceKernel* kernel, int grid_n) {
    if (spec.name == "point") return point_family(spec);
    if (spec.name == "steady-state") return steady_state_family(spec, c);
    if (spec.name == "sine-perturbation") return sine_family(spec, c);
    if (spec.name == "gaussian-dip") return gaussian_dip_family(spec);
    if (spec.name == "ea-uniform-g") return ea_uniform_g_family(spec, c, kernel, grid_n);
    throw std::invalid_argument("unknown initial-data family: " + spec.name);
}

GridField sample_line(const std::function<double(double)>& f, int n, double half_length) {
    GridField g = GridField::line(n, half_length);
    for (int i = 0; i < n; ++i) g[i] = f(g.x(i));
    g.far_left = f(-half_length);
    g.far_right = f(half_length);
    return g;
}

}  // namespace ctlab::families
