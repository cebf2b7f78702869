#include "qdemu/kernels.hpp"

namespace qdemu::kernels {
namespace {

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const float* a, const float* b, float* c,
                    bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0f;
    }
    const float* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = arow[p];
      const float* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void complex_mul_scalar(std::complex<double>* psi,
                        const std::complex<double>* phase, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double a = psi[i].real(), b = psi[i].imag();
    const double c = phase[i].real(), d = phase[i].imag();
    psi[i] = {a * c - b * d, a * d + b * c};
  }
}

void axpy_scalar(std::size_t n, float alpha, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double norm_sq_scalar(const std::complex<double>* z, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::norm(z[i]);
  return s;
}

void fft_dif_scalar(std::complex<double>* z, std::size_t n,
                    const std::complex<double>* tw) {
  for (std::size_t h = n / 2; h >= 1; h /= 2) {
    const std::complex<double>* w = tw + (n - 2 * h);
    for (std::size_t s = 0; s < n; s += 2 * h) {
      for (std::size_t j = 0; j < h; ++j) {
        const std::complex<double> a = z[s + j], b = z[s + j + h];
        z[s + j] = a + b;
        const std::complex<double> d = a - b;
        z[s + j + h] = {d.real() * w[j].real() - d.imag() * w[j].imag(),
                        d.real() * w[j].imag() + d.imag() * w[j].real()};
      }
    }
  }
}

void fft_dit_scalar(std::complex<double>* z, std::size_t n,
                    const std::complex<double>* tw) {
  for (std::size_t h = 1; h < n; h *= 2) {
    const std::complex<double>* w = tw + (n - 2 * h);
    for (std::size_t s = 0; s < n; s += 2 * h) {
      for (std::size_t j = 0; j < h; ++j) {
        const std::complex<double> a = z[s + j], x = z[s + j + h];
        const std::complex<double> b{x.real() * w[j].real() - x.imag() * w[j].imag(),
                                     x.real() * w[j].imag() + x.imag() * w[j].real()};
        z[s + j] = a + b;
        z[s + j + h] = a - b;
      }
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Backend::scalar, gemm_nn_scalar,
                                 complex_mul_scalar, axpy_scalar,
                                 norm_sq_scalar, fft_dif_scalar,
                                 fft_dit_scalar};
  return table;
}

}  // namespace qdemu::kernels
