#ifndef DMTLR_FFT_HPP
#define DMTLR_FFT_HPP

#include <complex>
#include <vector>

namespace dmtlr::fft {

bool is_power_of_two(int n);

// In-place radix-2 transform. n must be a power of two. The inverse applies
// the 1/n normalization.
void transform(std::complex<double>* data, int n, bool inverse);

// Row-major rows x cols in-place 2D transform; both dims powers of two.
void transform_2d(std::complex<double>* data, int rows, int cols, bool inverse);

// Real-field transforms used by the spectral solver. Rows are processed two
// at a time (packed into one complex transform), which cuts the row passes in
// half relative to a plain complex 2D transform.
void forward_2d_real_into(const double* field, std::complex<double>* spectrum,
                          int n);
void inverse_2d_real_into(const std::complex<double>* spectrum, double* field,
                          int n, std::complex<double>* work);

// Allocating conveniences over the _into variants.
std::vector<std::complex<double>> forward_2d_real(const std::vector<double>& field,
                                                  int n);
std::vector<double> inverse_2d_real(const std::vector<std::complex<double>>& spectrum,
                                    int n);

}  // namespace dmtlr::fft

#endif  // DMTLR_FFT_HPP
