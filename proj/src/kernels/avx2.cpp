// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include "qdemu/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include <array>
#include <cmath>
#include <cstdint>

namespace qdemu::kernels {
namespace {

__m256i tail_mask(std::size_t remaining) {
  alignas(32) static constexpr std::array<std::int32_t, 16> lanes{
      -1, -1, -1, -1, -1, -1, -1, -1, 0, 0, 0, 0, 0, 0, 0, 0};
  return _mm256_loadu_si256(
      reinterpret_cast<const __m256i*>(lanes.data() + 8 - remaining));
}

// Rows [i, i+R) x columns [j, j+16).
template <int R>
void block16(std::size_t n, std::size_t k, const float* a, const float* b,
             float* c, bool accumulate) {
  __m256 acc0[R], acc1[R];
  for (int r = 0; r < R; ++r) {
    acc0[r] = _mm256_setzero_ps();
    acc1[r] = _mm256_setzero_ps();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b + p * n);
    const __m256 b1 = _mm256_loadu_ps(b + p * n + 8);
    for (int r = 0; r < R; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + r * k + p);
      acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
      acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < R; ++r) {
    float* crow = c + r * n;
    if (accumulate) {
      acc0[r] = _mm256_add_ps(_mm256_loadu_ps(crow), acc0[r]);
      acc1[r] = _mm256_add_ps(_mm256_loadu_ps(crow + 8), acc1[r]);
    }
    _mm256_storeu_ps(crow, acc0[r]);
    _mm256_storeu_ps(crow + 8, acc1[r]);
  }
}

// Rows [i, i+R) x columns [j, j+width), width <= 8.
template <int R>
void block8(std::size_t n, std::size_t k, std::size_t width, const float* a,
            const float* b, float* c, bool accumulate) {
  const __m256i mask = tail_mask(width);
  __m256 acc[R];
  for (int r = 0; r < R; ++r) acc[r] = _mm256_setzero_ps();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 bv = _mm256_maskload_ps(b + p * n, mask);
    for (int r = 0; r < R; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + r * k + p);
      acc[r] = _mm256_fmadd_ps(av, bv, acc[r]);
    }
  }
  for (int r = 0; r < R; ++r) {
    float* crow = c + r * n;
    if (accumulate) {
      acc[r] = _mm256_add_ps(_mm256_maskload_ps(crow, mask), acc[r]);
    }
    _mm256_maskstore_ps(crow, mask, acc[r]);
  }
}

template <int R>
void row_panel(std::size_t n, std::size_t k, const float* a, const float* b,
               float* c, bool accumulate) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) block16<R>(n, k, a, b + j, c + j, accumulate);
  for (; j < n; j += 8) {
    const std::size_t width = n - j < 8 ? n - j : 8;
    block8<R>(n, k, width, a, b + j, c + j, accumulate);
  }
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a,
                  const float* b, float* c, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    row_panel<4>(n, k, a + i * k, b, c + i * n, accumulate);
  }
  switch (m - i) {
    case 3: row_panel<3>(n, k, a + i * k, b, c + i * n, accumulate); break;
    case 2: row_panel<2>(n, k, a + i * k, b, c + i * n, accumulate); break;
    case 1: row_panel<1>(n, k, a + i * k, b, c + i * n, accumulate); break;
    default: break;
  }
}

void complex_mul_avx2(std::complex<double>* psi,
                      const std::complex<double>* phase, std::size_t n) {
  auto* p = reinterpret_cast<double*>(psi);
  const auto* q = reinterpret_cast<const double*>(phase);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d z = _mm256_loadu_pd(p + 2 * i);    // a0 b0 a1 b1
    const __m256d w = _mm256_loadu_pd(q + 2 * i);    // c0 d0 c1 d1
    const __m256d wr = _mm256_movedup_pd(w);         // c0 c0 c1 c1
    const __m256d wi = _mm256_permute_pd(w, 0xF);    // d0 d0 d1 d1
    const __m256d zs = _mm256_permute_pd(z, 0x5);    // b0 a0 b1 a1
    // (a c - b d, b c + a d)
    const __m256d out = _mm256_fmaddsub_pd(z, wr, _mm256_mul_pd(zs, wi));
    _mm256_storeu_pd(p + 2 * i, out);
  }
  for (; i < n; ++i) {
    const double a = psi[i].real(), b = psi[i].imag();
    const double c = phase[i].real(), d = phase[i].imag();
    psi[i] = {std::fma(a, c, -b * d), std::fma(b, c, a * d)};
  }
}

void axpy_avx2(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i),
                                            _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

double norm_sq_avx2(const std::complex<double>* z, std::size_t n) {
  const auto* p = reinterpret_cast<const double*>(z);
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  const std::size_t len = 2 * n;
  for (; i + 8 <= len; i += 8) {
    const __m256d u = _mm256_loadu_pd(p + i);
    const __m256d v = _mm256_loadu_pd(p + i + 4);
    acc0 = _mm256_fmadd_pd(u, u, acc0);
    acc1 = _mm256_fmadd_pd(v, v, acc1);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < len; ++i) s += p[i] * p[i];
  return s;
}

// Two complex products per register: (x0, x1) * (w0, w1).
inline __m256d cmul2(__m256d x, __m256d w) {
  const __m256d wr = _mm256_movedup_pd(w);
  const __m256d wi = _mm256_permute_pd(w, 0xF);
  const __m256d xs = _mm256_permute_pd(x, 0x5);
  return _mm256_fmaddsub_pd(x, wr, _mm256_mul_pd(xs, wi));
}

// h == 1 stage: unit twiddle, butterflies between neighbours.
void pairs_pass(double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; i += 2) {
    const __m128d a = _mm_loadu_pd(p + 2 * i);
    const __m128d b = _mm_loadu_pd(p + 2 * i + 2);
    _mm_storeu_pd(p + 2 * i, _mm_add_pd(a, b));
    _mm_storeu_pd(p + 2 * i + 2, _mm_sub_pd(a, b));
  }
}

void fft_dif_avx2(std::complex<double>* z, std::size_t n,
                  const std::complex<double>* tw) {
  auto* p = reinterpret_cast<double*>(z);
  for (std::size_t h = n / 2; h >= 2; h /= 2) {
    const auto* w = reinterpret_cast<const double*>(tw + (n - 2 * h));
    for (std::size_t s = 0; s < n; s += 2 * h) {
      double* lo = p + 2 * s;
      double* hi = lo + 2 * h;
      for (std::size_t j = 0; j < h; j += 2) {
        const __m256d a = _mm256_loadu_pd(lo + 2 * j);
        const __m256d b = _mm256_loadu_pd(hi + 2 * j);
        _mm256_storeu_pd(lo + 2 * j, _mm256_add_pd(a, b));
        _mm256_storeu_pd(hi + 2 * j,
                         cmul2(_mm256_sub_pd(a, b), _mm256_loadu_pd(w + 2 * j)));
      }
    }
  }
  if (n >= 2) pairs_pass(p, n);
}

void fft_dit_avx2(std::complex<double>* z, std::size_t n,
                  const std::complex<double>* tw) {
  auto* p = reinterpret_cast<double*>(z);
  if (n >= 2) pairs_pass(p, n);
  for (std::size_t h = 2; h < n; h *= 2) {
    const auto* w = reinterpret_cast<const double*>(tw + (n - 2 * h));
    for (std::size_t s = 0; s < n; s += 2 * h) {
      double* lo = p + 2 * s;
      double* hi = lo + 2 * h;
      for (std::size_t j = 0; j < h; j += 2) {
        const __m256d a = _mm256_loadu_pd(lo + 2 * j);
        const __m256d b = cmul2(_mm256_loadu_pd(hi + 2 * j), _mm256_loadu_pd(w + 2 * j));
        _mm256_storeu_pd(lo + 2 * j, _mm256_add_pd(a, b));
        _mm256_storeu_pd(hi + 2 * j, _mm256_sub_pd(a, b));
      }
    }
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Backend::avx2, gemm_nn_avx2,
                                 complex_mul_avx2, axpy_avx2, norm_sq_avx2,
                                 fft_dif_avx2, fft_dit_avx2};
  static const bool supported = __builtin_cpu_supports("avx2") &&
                                __builtin_cpu_supports("fma");
  return supported ? &table : nullptr;
}

}  // namespace qdemu::kernels

#else

namespace qdemu::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace qdemu::kernels

#endif
