#pragma once

#include <complex>
#include <vector>

namespace ctlab::fft {

// In-place radix-2 FFT, n a power of two. inverse=true applies the
// conjugate transform without the 1/n normalization.
void transform(std::vector<std::complex<double>>& a, bool inverse);

bool is_power_of_two(int n);

// Circular convolution out[i] = sum_j a[(i-j) mod n] * b[j].
std::vector<double> circular_convolve(const std::vector<double>& a,
                                      const std::vector<double>& b);

// Spectral derivative of a periodic sample vector on [-1/2, 1/2).
std::vector<double> periodic_derivative(const std::vector<double>& v);

// Spectral antiderivative with zero mean; input must have (near-)zero mean,
// the k=0 mode is dropped.
std::vector<double> periodic_antiderivative(const std::vector<double>& v);

}  // namespace ctlab::fft
