#include "dmtlr/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace dmtlr::fft {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

// Twiddles for the largest stage; stage `len` uses every (n/len)-th entry,
// which avoids the rounding drift of incremental multiplication.
std::vector<std::complex<double>> twiddle_table(int n, bool inverse) {
  std::vector<std::complex<double>> w(static_cast<std::size_t>(n / 2));
  const double sign = inverse ? 1.0 : -1.0;
  for (int k = 0; k < n / 2; ++k) {
    const double angle = sign * kTwoPi * k / n;
    w[static_cast<std::size_t>(k)] = {std::cos(angle), std::sin(angle)};
  }
  return w;
}

void bit_reverse_permute(std::complex<double>* a, int n) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
}

void transform_with_table(std::complex<double>* a, int n,
                          const std::vector<std::complex<double>>& w,
                          bool inverse) {
  bit_reverse_permute(a, n);
  for (int len = 2; len <= n; len <<= 1) {
    const int half = len >> 1;
    const int stride = n / len;
    for (int start = 0; start < n; start += len) {
      for (int k = 0; k < half; ++k) {
        const std::complex<double> t = a[start + half + k] * w[static_cast<std::size_t>(k * stride)];
        const std::complex<double> u = a[start + k];
        a[start + k] = u + t;
        a[start + half + k] = u - t;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / n;
    for (int i = 0; i < n; ++i) a[i] *= scale;
  }
}

}  // namespace

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void transform(std::complex<double>* data, int n, bool inverse) {
  if (!is_power_of_two(n))
    throw std::invalid_argument("fft: length " + std::to_string(n) +
                                " is not a power of two");
  if (n == 1) return;
  const auto w = twiddle_table(n, inverse);
  transform_with_table(data, n, w, inverse);
}

void transform_2d(std::complex<double>* data, int rows, int cols, bool inverse) {
  if (!is_power_of_two(rows) || !is_power_of_two(cols))
    throw std::invalid_argument("fft: 2D dims must be powers of two");
  const auto wr = cols > 1 ? twiddle_table(cols, inverse)
                           : std::vector<std::complex<double>>{};
  for (int r = 0; r < rows; ++r)
    if (cols > 1) transform_with_table(data + static_cast<std::size_t>(r) * cols, cols, wr, inverse);

  if (rows == 1) return;
  const auto wc = twiddle_table(rows, inverse);
  std::vector<std::complex<double>> column(static_cast<std::size_t>(rows));
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r)
      column[static_cast<std::size_t>(r)] = data[static_cast<std::size_t>(r) * cols + c];
    transform_with_table(column.data(), rows, wc, inverse);
    for (int r = 0; r < rows; ++r)
      data[static_cast<std::size_t>(r) * cols + c] = column[static_cast<std::size_t>(r)];
  }
}

namespace {

void transform_columns(std::complex<double>* data, int n,
                       const std::vector<std::complex<double>>& table,
                       bool inverse) {
  std::vector<std::complex<double>> column(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r)
      column[static_cast<std::size_t>(r)] = data[static_cast<std::size_t>(r) * n + c];
    transform_with_table(column.data(), n, table, inverse);
    for (int r = 0; r < n; ++r)
      data[static_cast<std::size_t>(r) * n + c] = column[static_cast<std::size_t>(r)];
  }
}

}  // namespace

void forward_2d_real_into(const double* field, std::complex<double>* spectrum,
                          int n) {
  if (!is_power_of_two(n))
    throw std::invalid_argument("fft: grid size must be a power of two");
  if (n == 1) {
    spectrum[0] = field[0];
    return;
  }
  const auto fwd = twiddle_table(n, false);
  // Row pass, two real rows per complex transform.
  std::vector<std::complex<double>> packed(static_cast<std::size_t>(n));
  for (int r = 0; r < n; r += 2) {
    const double* row0 = field + static_cast<std::size_t>(r) * n;
    const double* row1 = row0 + n;
    for (int x = 0; x < n; ++x)
      packed[static_cast<std::size_t>(x)] = {row0[x], row1[x]};
    transform_with_table(packed.data(), n, fwd, false);
    std::complex<double>* out0 = spectrum + static_cast<std::size_t>(r) * n;
    std::complex<double>* out1 = out0 + n;
    out0[0] = {packed[0].real(), 0.0};
    out1[0] = {packed[0].imag(), 0.0};
    for (int k = 1; k < n; ++k) {
      const std::complex<double> a = packed[static_cast<std::size_t>(k)];
      const std::complex<double> b = std::conj(packed[static_cast<std::size_t>(n - k)]);
      out0[k] = 0.5 * (a + b);
      const std::complex<double> d = a - b;  // i * (imag-part spectrum)
      out1[k] = {0.5 * d.imag(), -0.5 * d.real()};
    }
  }
  transform_columns(spectrum, n, fwd, false);
}

void inverse_2d_real_into(const std::complex<double>* spectrum, double* field,
                          int n, std::complex<double>* work) {
  if (!is_power_of_two(n))
    throw std::invalid_argument("fft: grid size must be a power of two");
  const std::size_t total = static_cast<std::size_t>(n) * n;
  if (n == 1) {
    field[0] = spectrum[0].real();
    return;
  }
  std::copy(spectrum, spectrum + total, work);
  const auto inv = twiddle_table(n, true);
  transform_columns(work, n, inv, true);
  // Row pass: each row of `work` is Hermitian, so two rows invert per
  // transform with the second row riding in the imaginary part.
  std::vector<std::complex<double>> packed(static_cast<std::size_t>(n));
  for (int r = 0; r < n; r += 2) {
    const std::complex<double>* row0 = work + static_cast<std::size_t>(r) * n;
    const std::complex<double>* row1 = row0 + n;
    for (int k = 0; k < n; ++k)
      packed[static_cast<std::size_t>(k)] =
          row0[k] + std::complex<double>(0.0, 1.0) * row1[k];
    transform_with_table(packed.data(), n, inv, true);
    double* out0 = field + static_cast<std::size_t>(r) * n;
    double* out1 = out0 + n;
    for (int x = 0; x < n; ++x) {
      out0[x] = packed[static_cast<std::size_t>(x)].real();
      out1[x] = packed[static_cast<std::size_t>(x)].imag();
    }
  }
}

std::vector<std::complex<double>> forward_2d_real(const std::vector<double>& field,
                                                  int n) {
  std::vector<std::complex<double>> spectrum(field.size());
  forward_2d_real_into(field.data(), spectrum.data(), n);
  return spectrum;
}

std::vector<double> inverse_2d_real(const std::vector<std::complex<double>>& spectrum,
                                    int n) {
  std::vector<double> field(spectrum.size());
  std::vector<std::complex<double>> work(spectrum.size());
  inverse_2d_real_into(spectrum.data(), field.data(), n, work.data());
  return field;
}

}  // namespace dmtlr::fft
