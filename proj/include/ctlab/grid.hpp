#pragma once

#include <stdexcept>
#include <vector>

namespace ctlab {

enum class Domain { Torus, Line };

// Uniform 1D sampling of a scalar field.
//
// Torus fields live on [-1/2, 1/2) with nodes x_i = -1/2 + i*h, h = 1/n,
// so x = 0 sits at index n/2 (n is kept even). Line fields are
// cell-centered on [-L, L], x_i = -L + (i+1/2)*h with h = 2L/n, and carry
// constant far-field extension values beyond both ends.
struct GridField {
    Domain domain = Domain::Torus;
    int n = 0;
    double half_length = 0.5;
    double far_left = 0.0;
    double far_right = 0.0;
    std::vector<double> values;

    static GridField torus(int n, double fill = 0.0) {
        if (n < 2 || n % 2 != 0)
            throw std::invalid_argument("torus grid size must be even and >= 2");
        GridField f;
        f.domain = Domain::Torus;
        f.n = n;
        f.half_length = 0.5;
        f.values.assign(static_cast<size_t>(n), fill);
        return f;
    }

    static GridField line(int n, double half_length, double fill = 0.0) {
        if (n < 2) throw std::invalid_argument("line grid size must be >= 2");
        if (half_length <= 0.0) throw std::invalid_argument("line half-length must be positive");
        GridField f;
        f.domain = Domain::Line;
        f.n = n;
        f.half_length = half_length;
        f.far_left = fill;
        f.far_right = fill;
        f.values.assign(static_cast<size_t>(n), fill);
        return f;
    }

    double h() const {
        return domain == Domain::Torus ? 1.0 / n : 2.0 * half_length / n;
    }

    double x(int i) const {
        return domain == Domain::Torus ? -0.5 + i * h()
                                       : -half_length + (i + 0.5) * h();
    }

    // Value with boundary handling: periodic wrap on the torus, constant
    // far-field extension on the line.
    double at(int i) const {
        if (domain == Domain::Torus) {
            int j = i % n;
            if (j < 0) j += n;
            return values[static_cast<size_t>(j)];
        }
        if (i < 0) return far_left;
        if (i >= n) return far_right;
        return values[static_cast<size_t>(i)];
    }

    double& operator[](int i) { return values[static_cast<size_t>(i)]; }
    double operator[](int i) const { return values[static_cast<size_t>(i)]; }

    double mass() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * h();
    }

    double min() const {
        double m = values[0];
        for (double v : values) m = v < m ? v : m;
        return m;
    }

    double max() const {
        double m = values[0];
        for (double v : values) m = v > m ? v : m;
        return m;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values) {
            double a = v < 0 ? -v : v;
            m = a > m ? a : m;
        }
        return m;
    }
};

inline bool same_domain(const GridField& a, const GridField& b) {
    if (a.domain != b.domain || a.n != b.n) return false;
    if (a.domain == Domain::Line && a.half_length != b.half_length) return false;
    return true;
}

// Wrap a separation onto the torus representative in [-1/2, 1/2).
inline double torus_wrap(double d) {
    d -= static_cast<long long>(d);
    if (d < -0.5) d += 1.0;
    if (d >= 0.5) d -= 1.0;
    return d;
}

// Centered derivative; second order. Torus wraps, line replicates edges.
GridField centered_derivative(const GridField& f);

}  // namespace ctlab
