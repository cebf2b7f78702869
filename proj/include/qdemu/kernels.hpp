#pragma once

// Data-parallel inner loops with a scalar reference and an AVX2/FMA variant.
// The variant is picked once at startup from CPUID; QDEMU_SIMD=scalar forces
// the reference path. Every kernel computes each output element with the same
// operation sequence regardless of its row position, so results do not depend
// on batch size.

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

namespace qdemu::kernels {

enum class Backend { scalar, avx2 };

struct KernelTable {
  Backend backend;
  // C[M,N] (+)= A[M,K] * B[K,N], all row-major and densely packed.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate);
  // psi[i] *= phase[i]
  void (*complex_mul_inplace)(std::complex<double>* psi,
                              const std::complex<double>* phase,
                              std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(std::size_t n, float alpha, const float* x, float* y);
  // sum_i |z_i|^2
  double (*norm_sq)(const std::complex<double>* z, std::size_t n);
  // Radix-2 passes over n = 2^m points. `tw` packs each stage's twiddles
  // w_j = exp(-+ i pi j / h), j < h, at offset n - 2h.
  // fft_dif: natural order in, bit-reversed out (half-size n/2 first).
  // fft_dit: bit-reversed in, natural order out (half-size 1 first).
  void (*fft_dif)(std::complex<double>* z, std::size_t n,
                  const std::complex<double>* tw);
  void (*fft_dit)(std::complex<double>* z, std::size_t n,
                  const std::complex<double>* tw);
};

const KernelTable& scalar_table();
// Null when the build or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

const KernelTable& active();
Backend active_backend();
// Overrides the runtime choice; throws if the backend is unavailable.
void set_backend(Backend backend);
bool backend_available(Backend backend);
std::string_view backend_name(Backend backend);

// Convenience wrappers around active().
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a,
             const float* b, float* c, bool accumulate);
// C[M,N] (+)= A[M,K] * B[N,K]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a,
             const float* b, float* c, bool accumulate);
// C[M,N] (+)= A[K,M]^T * B[K,N]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a,
             const float* b, float* c, bool accumulate);

inline void complex_mul_inplace(std::span<std::complex<double>> psi,
                                std::span<const std::complex<double>> phase) {
  active().complex_mul_inplace(psi.data(), phase.data(), psi.size());
}

inline double norm_sq(std::span<const std::complex<double>> z) {
  return active().norm_sq(z.data(), z.size());
}

}  // namespace qdemu::kernels
