#include "ctlab/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace ctlab::fft {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void transform(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (!is_power_of_two(static_cast<int>(n)))
        throw std::invalid_argument("fft size must be a power of two");

    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                std::complex<double> u = a[i + j];
                std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

std::vector<double> circular_convolve(const std::vector<double>& a,
                                      const std::vector<double>& b) {
    const size_t n = a.size();
    if (b.size() != n) throw std::invalid_argument("circular_convolve: size mismatch");
    std::vector<std::complex<double>> fa(a.begin(), a.end()), fb(b.begin(), b.end());
    transform(fa, false);
    transform(fb, false);
    for (size_t i = 0; i < n; ++i) fa[i] *= fb[i];
    transform(fa, true);
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = fa[i].real() / static_cast<double>(n);
    return out;
}

// Fourier wavenumbers for index k in 0..n-1: k for k <= n/2, k-n beyond.
static int signed_mode(size_t k, size_t n) {
    return k <= n / 2 ? static_cast<int>(k) : static_cast<int>(k) - static_cast<int>(n);
}

std::vector<double> periodic_derivative(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<std::complex<double>> f(v.begin(), v.end());
    transform(f, false);
    for (size_t k = 0; k < n; ++k) {
        int m = signed_mode(k, n);
        if (static_cast<size_t>(2 * std::abs(m)) == n) m = 0;  // drop Nyquist for odd derivative
        f[k] *= std::complex<double>(0.0, 2.0 * M_PI * m);
    }
    transform(f, true);
    std::vector<double> out(n);
    for (size_t k = 0; k < n; ++k) out[k] = f[k].real() / static_cast<double>(n);
    return out;
}

std::vector<double> periodic_antiderivative(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<std::complex<double>> f(v.begin(), v.end());
    transform(f, false);
    f[0] = 0.0;
    for (size_t k = 1; k < n; ++k) {
        int m = signed_mode(k, n);
        if (static_cast<size_t>(2 * std::abs(m)) == n) {
            f[k] = 0.0;
            continue;
        }
        f[k] /= std::complex<double>(0.0, 2.0 * M_PI * m);
    }
    transform(f, true);
    std::vector<double> out(n);
    for (size_t k = 0; k < n; ++k) out[k] = f[k].real() / static_cast<double>(n);
    return out;
}

}  // namespace ctlab::fft
