#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "doctest.h"
#include "qdemu/kernels.hpp"

using namespace qdemu;

namespace {

std::vector<float> random_floats(std::size_t n, std::mt19937& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Double-precision triple loop, the oracle for every GEMM variant.
std::vector<double> naive_gemm(std::size_t m, std::size_t n, std::size_t k,
                               const std::vector<float>& a, bool ta,
                               const std::vector<float>& b, bool tb) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta ? a[p * m + i] : a[i * k + p];
        const double bv = tb ? b[j * k + p] : b[p * n + j];
        c[i * n + j] += av * bv;
      }
  return c;
}

struct BackendGuard {
  kernels::Backend saved = kernels::active_backend();
  ~BackendGuard() { kernels::set_backend(saved); }
};

}  // namespace

TEST_CASE("gemm variants match a double-precision oracle on both backends") {
  BackendGuard guard;
  std::mt19937 rng(7);
  const std::size_t shapes[][3] = {{1, 1, 1},  {5, 3, 7},   {4, 16, 9},
                                   {7, 23, 5}, {13, 46, 69}, {64, 69, 69}};
  for (auto backend : {kernels::Backend::scalar, kernels::Backend::avx2}) {
    if (!kernels::backend_available(backend)) continue;
    kernels::set_backend(backend);
    CAPTURE(kernels::backend_name(backend));
    for (const auto& s : shapes) {
      const std::size_t m = s[0], n = s[1], k = s[2];
      const auto a = random_floats(m * k, rng);
      const auto b = random_floats(k * n, rng);
      const auto c0 = random_floats(m * n, rng);
      const auto ref_nn = naive_gemm(m, n, k, a, false, b, false);
      const auto ref_nt = naive_gemm(m, n, k, a, false, b, true);
      const auto ref_tn = naive_gemm(m, n, k, a, true, b, false);

      std::vector<float> c(m * n);
      kernels::gemm_nn(m, n, k, a.data(), b.data(), c.data(), false);
      for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref_nn[i]).epsilon(1e-5));

      c = c0;
      kernels::gemm_nn(m, n, k, a.data(), b.data(), c.data(), true);
      for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref_nn[i] + c0[i]).epsilon(1e-5));

      kernels::gemm_nt(m, n, k, a.data(), b.data(), c.data(), false);
      for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref_nt[i]).epsilon(1e-5));

      kernels::gemm_tn(m, n, k, a.data(), b.data(), c.data(), false);
      for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref_tn[i]).epsilon(1e-5));
    }
  }
}

TEST_CASE("gemm rows are independent of their position in the batch") {
  std::mt19937 rng(11);
  const std::size_t m = 11, n = 46, k = 69;
  const auto a = random_floats(m * k, rng);
  const auto b = random_floats(k * n, rng);
  std::vector<float> batch(m * n), single(n);
  kernels::gemm_nn(m, n, k, a.data(), b.data(), batch.data(), false);
  for (std::size_t i = 0; i < m; ++i) {
    kernels::gemm_nn(1, n, k, a.data() + i * k, b.data(), single.data(), false);
    for (std::size_t j = 0; j < n; ++j) REQUIRE(single[j] == batch[i * n + j]);
  }
}

TEST_CASE("avx2 and scalar elementwise kernels agree") {
  if (!kernels::backend_available(kernels::Backend::avx2)) return;
  const auto& s = kernels::scalar_table();
  const auto& v = *kernels::avx2_table();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t n : {1u, 2u, 3u, 17u, 1024u}) {
    std::vector<std::complex<double>> z(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = {u(rng), u(rng)};
      w[i] = std::polar(1.0, 6.0 * u(rng));
    }
    auto zs = z, zv = z;
    s.complex_mul_inplace(zs.data(), w.data(), n);
    v.complex_mul_inplace(zv.data(), w.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(zs[i] - zv[i]) < 1e-15);
      CHECK(std::abs(zs[i] - z[i] * w[i]) < 1e-15);
    }
    CHECK(s.norm_sq(z.data(), n) == doctest::Approx(v.norm_sq(z.data(), n)).epsilon(1e-14));

    std::vector<float> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<float>(u(rng));
      y[i] = static_cast<float>(u(rng));
    }
    auto ys = y, yv = y;
    s.axpy(n, 0.3f, x.data(), ys.data());
    v.axpy(n, 0.3f, x.data(), yv.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(ys[i] == doctest::Approx(yv[i]).epsilon(1e-6));
  }
}

TEST_CASE("backend selection") {
  BackendGuard guard;
  kernels::set_backend(kernels::Backend::scalar);
  CHECK(kernels::active_backend() == kernels::Backend::scalar);
  CHECK(kernels::backend_name(kernels::Backend::scalar) == "scalar");
  if (!kernels::backend_available(kernels::Backend::avx2)) {
    CHECK_THROWS(kernels::set_backend(kernels::Backend::avx2));
  }
}

TEST_CASE("fft passes agree between backends and invert each other") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t n : {1u, 2u, 4u, 8u, 128u, 1024u}) {
    // Twiddles in the packed per-stage layout.
    std::vector<std::complex<double>> fw(n > 1 ? n - 1 : 1), iw(fw.size());
    for (std::size_t h = 1; h < n; h *= 2) {
      for (std::size_t j = 0; j < h; ++j) {
        fw[n - 2 * h + j] = std::polar(1.0, -M_PI * double(j) / double(h));
        iw[n - 2 * h + j] = std::conj(fw[n - 2 * h + j]);
      }
    }
    std::vector<std::complex<double>> z(n);
    for (auto& x : z) x = {u(rng), u(rng)};
    auto zs = z;
    kernels::scalar_table().fft_dif(zs.data(), n, fw.data());
    if (const auto* v = kernels::avx2_table()) {
      auto zv = z;
      v->fft_dif(zv.data(), n, fw.data());
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(zv[i] - zs[i]) < 1e-12);
      v->fft_dit(zv.data(), n, iw.data());
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(zv[i] / double(n) - z[i]) < 1e-13);
    }
    kernels::scalar_table().fft_dit(zs.data(), n, iw.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(zs[i] / double(n) - z[i]) < 1e-13);
  }
}
