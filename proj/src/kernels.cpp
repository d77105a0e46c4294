#include "ctlab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctlab/fft.hpp"

namespace ctlab::kernels {

namespace {

GridField sample_on_torus(const std::function<double(double)>& eval, int n) {
    GridField g = GridField::torus(n);
    for (int i = 0; i < n; ++i) g[i] = eval(g.x(i));
    return g;
}

void check_bounded_invariants(const BoundedKernel& k) {
    if (k.psi_min < 0.0 || k.psi_max < k.psi_min)
        throw std::invalid_argument("bounded kernel needs 0 <= psi_min <= psi_max");
    const double tol = 1e-12 * (1.0 + std::abs(k.psi_max));
    for (int i = 0; i < k.samples.n; ++i) {
        const double v = k.samples[i];
        if (v < k.psi_min - tol || v > k.psi_max + tol)
            throw std::invalid_argument("bounded kernel sample outside [psi_min, psi_max]");
        const double mirror = k.samples[(k.samples.n - i) % k.samples.n];
        if (std::abs(v - mirror) > tol)
            throw std::invalid_argument("bounded kernel samples not symmetric about 0");
    }
}

}  // namespace

BoundedKernel constant_kernel(double a, int n) {
    BoundedKernel k;
    k.eval = [a](double) { return a; };
    k.samples = sample_on_torus(k.eval, n);
    k.psi_min = k.psi_max = a;
    k.name = "constant";
    check_bounded_invariants(k);
    return k;
}

BoundedKernel tophat_kernel(double height, double half_width, int n) {
    if (half_width <= 0.0 || half_width > 0.5)
        throw std::invalid_argument("tophat half-width must lie in (0, 1/2]");
    BoundedKernel k;
    k.eval = [height, half_width](double x) {
        const double a = std::abs(x);
        if (a < half_width) return height;
        if (a == half_width) return 0.5 * height;  // midpoint value at the jump
        return 0.0;
    };
    k.samples = sample_on_torus(k.eval, n);
    k.psi_min = half_width >= 0.5 ? height : 0.0;
    k.psi_max = height;
    k.name = "tophat";
    check_bounded_invariants(k);
    return k;
}

BoundedKernel triangle_kernel(double height, double half_width, int n) {
    if (half_width <= 0.0 || half_width > 0.5)
        throw std::invalid_argument("triangle half-width must lie in (0, 1/2]");
    BoundedKernel k;
    k.eval = [height, half_width](double x) {
        const double a = std::abs(x);
        return a >= half_width ? 0.0 : height * (1.0 - a / half_width);
    };
    k.samples = sample_on_torus(k.eval, n);
    k.psi_min = half_width >= 0.5 ? k.samples.min() : 0.0;
    k.psi_max = height;
    k.name = "triangle";
    check_bounded_invariants(k);
    return k;
}

BoundedKernel cosine_kernel(double offset, double amplitude, int n) {
    if (offset < std::abs(amplitude))
        throw std::invalid_argument("cosine kernel must stay nonnegative");
    BoundedKernel k;
    k.eval = [offset, amplitude](double x) { return offset + amplitude * std::cos(2.0 * M_PI * x); };
    k.samples = sample_on_torus(k.eval, n);
    k.psi_min = offset - std::abs(amplitude);
    k.psi_max = offset + std::abs(amplitude);
    k.name = "cosine";
    check_bounded_invariants(k);
    return k;
}

BoundedKernel exponential_kernel(double amplitude, double rate, int n) {
    if (amplitude < 0.0 || rate < 0.0)
        throw std::invalid_argument("exponential kernel needs amplitude, rate >= 0");
    BoundedKernel k;
    k.eval = [amplitude, rate](double x) { return amplitude * std::exp(-rate * std::abs(x)); };
    k.samples = sample_on_torus(k.eval, n);
    k.psi_min = amplitude * std::exp(-rate * 0.5);
    k.psi_max = amplitude;
    k.name = "exp";
    check_bounded_invariants(k);
    return k;
}

BoundedKernel tabulated_kernel(const std::vector<double>& samples) {
    const int n = static_cast<int>(samples.size());
    GridField g = GridField::torus(n);
    g.values = samples;
    BoundedKernel k;
    k.samples = g;
    k.psi_min = g.min();
    k.psi_max = g.max();
    // linear interpolation between nodes, with symmetric wrap
    k.eval = [g](double x) {
        const double h = g.h();
        const double s = (torus_wrap(x) + 0.5) / h;
        const int i0 = static_cast<int>(std::floor(s));
        const double w = s - i0;
        return (1.0 - w) * g.at(i0) + w * g.at(i0 + 1);
    };
    k.name = "tabulated";
    check_bounded_invariants(k);
    return k;
}

L1Kernel power_singular_kernel(double amplitude, double exponent, int n) {
    if (amplitude < 0.0) throw std::invalid_argument("power kernel amplitude must be >= 0");
    if (exponent <= 0.0 || exponent >= 1.0)
        throw std::invalid_argument("power kernel exponent must lie in (0, 1)");
    L1Kernel k;
    k.eval = [amplitude, exponent](double x) {
        return amplitude * std::pow(std::abs(x), -exponent);
    };
    k.singular_at_zero = true;
    k.cell_mass_near_zero = [amplitude, exponent](double w) {
        // integral of a*|x|^-p over [-w/2, w/2]
        return 2.0 * amplitude * std::pow(0.5 * w, 1.0 - exponent) / (1.0 - exponent);
    };
    k.samples = GridField::torus(n);
    for (int i = 0; i < n; ++i)
        k.samples[i] = (i == n / 2) ? k.cell_mass_near_zero(k.samples.h()) / k.samples.h()
                                    : k.eval(k.samples.x(i));
    const L1Stats stats = l1_stats(k.eval, 1 << 16);
    k.l1_norm = stats.l1_norm;
    k.gamma = stats.gamma;
    k.name = "power";
    return k;
}

L1Kernel as_l1(const BoundedKernel& b) {
    L1Kernel k;
    k.eval = b.eval;
    k.singular_at_zero = false;
    k.samples = b.samples;
    const L1Stats stats = l1_stats(b.eval, 1 << 16);
    k.l1_norm = stats.l1_norm;
    k.gamma = stats.gamma;
    k.name = b.name;
    return k;
}

RelaxKernel gaussian_relax_kernel(double sigma, double support_radius) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian sigma must be positive");
    RelaxKernel q;
    const double norm = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
    q.eval = [sigma, norm](double x) { return norm * std::exp(-0.5 * x * x / (sigma * sigma)); };
    q.support_radius = support_radius;
    q.l1_norm = 1.0;
    q.name = "gaussian";
    return q;
}

RelaxKernel exponential_relax_kernel(double support_radius) {
    RelaxKernel q;
    q.eval = [](double x) { return 0.5 * std::exp(-std::abs(x)); };
    q.support_radius = support_radius;
    q.l1_norm = 1.0;
    q.name = "exp";
    return q;
}

RelaxKernel tophat_relax_kernel(double half_width) {
    if (half_width <= 0.0) throw std::invalid_argument("tophat half-width must be positive");
    RelaxKernel q;
    q.eval = [half_width](double x) {
        const double a = std::abs(x);
        if (a < half_width) return 0.5 / half_width;
        if (a == half_width) return 0.25 / half_width;
        return 0.0;
    };
    q.support_radius = half_width;
    q.l1_norm = 1.0;
    q.name = "tophat";
    return q;
}

// --- convolution --------------------------------------------------------

static void check_convolve_args(const GridField& psi, const GridField& rho) {
    if (psi.domain != Domain::Torus || rho.domain != Domain::Torus || !same_domain(psi, rho))
        throw std::invalid_argument("periodic_convolve: kernel and density must share the torus grid");
}

static void check_density(const GridField& rho) {
    for (double v : rho.values)
        if (v < 0.0) throw std::invalid_argument("periodic_convolve: negative density");
}

GridField periodic_convolve_direct(const GridField& psi_samples, const GridField& rho) {
    check_convolve_args(psi_samples, rho);
    const int n = rho.n;
    const double h = rho.h();
    GridField out = GridField::torus(n);
    const int half = n / 2;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            int m = i - j + half;
            m %= n;
            if (m < 0) m += n;
            s += psi_samples[m] * rho[j];
        }
        out[i] = s * h;
    }
    return out;
}

GridField periodic_convolve_fast(const GridField& psi_samples, const GridField& rho) {
    check_convolve_args(psi_samples, rho);
    const int n = rho.n;
    if (!fft::is_power_of_two(n)) return periodic_convolve_direct(psi_samples, rho);
    // rotate kernel so the zero-separation sample sits at index 0
    std::vector<double> rot(static_cast<size_t>(n));
    for (int m = 0; m < n; ++m) rot[static_cast<size_t>(m)] = psi_samples[(m + n / 2) % n];
    std::vector<double> conv = fft::circular_convolve(rho.values, rot);
    GridField out = GridField::torus(n);
    const double h = rho.h();
    for (int i = 0; i < n; ++i) out[i] = conv[static_cast<size_t>(i)] * h;
    return out;
}

GridField periodic_convolve(const BoundedKernel& psi, const GridField& rho) {
    check_density(rho);
    return periodic_convolve_fast(psi.samples, rho);
}

GridField periodic_convolve(const L1Kernel& psi, const GridField& rho) {
    check_density(rho);
    return periodic_convolve_fast(psi.samples, rho);
}

GridField periodic_convolve(const InfluenceKernel& psi, const GridField& rho) {
    check_density(rho);
    return periodic_convolve_fast(kernel_samples(psi), rho);
}

// --- L1 statistics -------------------------------------------------------

double gamma_of_samples(std::vector<double> samples) {
    const size_t n = samples.size();
    if (n < 2) throw std::invalid_argument("gamma needs at least two samples");
    std::sort(samples.begin(), samples.end(), std::greater<double>());
    double s = 0.0;
    for (size_t i = n / 2; i < n; ++i) s += samples[i];
    return s / static_cast<double>(n);
}

static double midpoint_l1(const std::function<double(double)>& psi, int n,
                          std::vector<double>* keep = nullptr) {
    double s = 0.0;
    if (keep) keep->resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double x = -0.5 + (i + 0.5) / n;
        const double v = psi(x);
        if (!(v >= 0.0))
            throw std::invalid_argument("l1_stats: kernel must be nonnegative and finite at midpoints");
        if (keep) (*keep)[static_cast<size_t>(i)] = v;
        s += v;
    }
    return s / n;
}

L1Stats l1_stats(const std::function<double(double)>& psi, int n_samples) {
    if (n_samples < 8) throw std::invalid_argument("l1_stats: too few samples");
    int n = n_samples;
    if (n % 2 != 0) ++n;

    // Refinement probe: for an integrable singularity the midpoint sums
    // settle; for 1/|x| and worse the increments stop shrinking.
    const double i1 = midpoint_l1(psi, n / 4);
    const double i2 = midpoint_l1(psi, n / 2);
    std::vector<double> samples;
    const double i3 = midpoint_l1(psi, n, &samples);
    const double d21 = std::abs(i2 - i1);
    const double d32 = std::abs(i3 - i2);
    const double scale = std::abs(i3) + 1e-300;
    if (d32 > 1e-6 * scale && d32 > 0.995 * d21)
        throw std::domain_error("l1_stats: quadrature refinement diverges (non-integrable singularity?)");

    L1Stats out;
    out.l1_norm = i3;
    out.gamma = gamma_of_samples(std::move(samples));
    return out;
}

// --- relaxation kernel validation ----------------------------------------

ValidationReport validate_relax_kernel(const RelaxKernel& q, int n_quad) {
    ValidationReport rep;
    if (q.support_radius <= 0.0) {
        rep.checks.push_back({"support_radius > 0", false, q.support_radius});
        return rep;
    }
    int n = n_quad;
    if (n % 2 != 0) ++n;
    const double R = q.support_radius;
    const double h = 2.0 * R / n;

    double mass = 0.0, sym_resid = 0.0, mono_resid = 0.0;
    double prev = q.eval(0.5 * h);
    for (int i = 0; i < n; ++i) {
        const double x = -R + (i + 0.5) * h;
        const double v = q.eval(x);
        mass += v * h;
        if (x > 0.0) {
            sym_resid = std::max(sym_resid, std::abs(v - q.eval(-x)));
            if (v > prev) mono_resid = std::max(mono_resid, v - prev);
            prev = v;
        }
    }
    const double scale = std::abs(q.eval(0.25 * h)) + 1.0;
    rep.checks.push_back({"symmetric", sym_resid <= 1e-12 * scale, sym_resid});
    rep.checks.push_back({"unit mass", std::abs(mass - 1.0) <= 1e-6, std::abs(mass - 1.0)});
    rep.checks.push_back({"nonincreasing away from 0", mono_resid <= 1e-12 * scale, mono_resid});
    return rep;
}

// --- variant accessors ----------------------------------------------------

const GridField& kernel_samples(const InfluenceKernel& k) {
    return std::visit([](const auto& v) -> const GridField& { return v.samples; }, k);
}

double kernel_value(const InfluenceKernel& k, double dx) {
    return std::visit([dx](const auto& v) { return v.value(dx); }, k);
}

double kernel_zero_value(const InfluenceKernel& k, double cell_width) {
    return std::visit([cell_width](const auto& v) { return v.zero_value(cell_width); }, k);
}

double kernel_l1_norm(const InfluenceKernel& k) {
    if (std::holds_alternative<L1Kernel>(k)) return std::get<L1Kernel>(k).l1_norm;
    return std::get<BoundedKernel>(k).samples.mass();
}

const std::string& kernel_name(const InfluenceKernel& k) {
    return std::visit([](const auto& v) -> const std::string& { return v.name; }, k);
}

}  // namespace ctlab::kernels
