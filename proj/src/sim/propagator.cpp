#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qdemu/error.hpp"
#include "qdemu/kernels.hpp"
#include "qdemu/sim.hpp"

namespace qdemu {
namespace {

constexpr Complex kI{0.0, 1.0};

// Compact sixth-order second derivative:
//   alpha f''_{i-1} + f''_i + alpha f''_{i+1}
//     = a (f_{i+1} - 2 f_i + f_{i-1}) / dx^2 + b (f_{i+2} - 2 f_i + f_{i-2}) / (4 dx^2)
constexpr double kAlpha = 2.0 / 11.0;
constexpr double kA = 12.0 / 11.0;
constexpr double kB = 3.0 / 11.0;

void check_finite(std::span<const Complex> psi, const char* what) {
  for (const Complex& z : psi) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw NumericalError(std::string("non-finite value in ") + what);
    }
  }
}

}  // namespace

// Circulant pentadiagonal system M x = r with M[i][i+d] = c[d+2] (indices mod
// N). Solved as the open band plus a rank-4 Woodbury correction for the four
// wrap-around rows.
struct Propagator::Banded {
  std::size_t n;
  std::array<Complex, 5> lhs;  // M = B - i tau D
  std::array<Complex, 5> rhs;  // R = B + i tau D
  // Band LU, row i stores columns i-2..i+2 at [i][0..4].
  std::vector<std::array<Complex, 5>> lu;
  std::vector<std::array<Complex, 4>> z;  // A_band^{-1} U, row-major [n][4]
  std::array<std::array<Complex, 4>, 4> s_inv{};

  std::vector<Complex> inv_pivot;

  void band_solve(std::span<Complex> x) const {
    x[1] -= lu[1][1] * x[0];
    for (std::size_t i = 2; i < n; ++i) {
      x[i] -= lu[i][1] * x[i - 1] + lu[i][0] * x[i - 2];
    }
    x[n - 1] *= inv_pivot[n - 1];
    x[n - 2] = (x[n - 2] - lu[n - 2][3] * x[n - 1]) * inv_pivot[n - 2];
    for (std::size_t ii = n - 2; ii-- > 0;) {
      x[ii] = (x[ii] - lu[ii][3] * x[ii + 1] - lu[ii][4] * x[ii + 2]) * inv_pivot[ii];
    }
  }

  // y = V^T x for the corner rows 0, 1, n-2, n-1.
  std::array<Complex, 4> corner_product(std::span<const Complex> x) const {
    return {lhs[0] * x[n - 2] + lhs[1] * x[n - 1], lhs[0] * x[n - 1],
            lhs[4] * x[0], lhs[3] * x[0] + lhs[4] * x[1]};
  }

  explicit Banded(std::size_t points, double dx, double dt) : n(points) {
    if (n < 8) throw std::invalid_argument("real-space propagator needs >= 8 points");
    const double inv = 1.0 / (dx * dx);
    const double d1 = kA * inv;
    const double d2 = kB * 0.25 * inv;
    const double d0 = -2.0 * d1 - 2.0 * d2;
    const std::array<double, 5> d{d2, d1, d0, d1, d2};
    const std::array<double, 5> b{0.0, kAlpha, 1.0, kAlpha, 0.0};
    const double tau = 0.25 * dt;
    for (int k = 0; k < 5; ++k) {
      lhs[k] = b[k] - kI * tau * d[k];
      rhs[k] = b[k] + kI * tau * d[k];
    }
    lu.assign(n, lhs);
    // No pivoting: M is strictly diagonally dominant.
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t r = 1; r <= 2 && k + r < n; ++r) {
        const std::size_t i = k + r;
        // Entry (i, k) lives at lu[i][2 - r].
        const Complex l = lu[i][2 - r] / lu[k][2];
        lu[i][2 - r] = l;
        for (std::size_t c = 1; c <= 2 && k + c < n; ++c) {
          // (i, k + c) -> lu[i][2 - r + c]; (k, k + c) -> lu[k][2 + c]
          lu[i][2 - r + c] -= l * lu[k][2 + c];
        }
      }
    }
    inv_pivot.resize(n);
    for (std::size_t i = 0; i < n; ++i) inv_pivot[i] = 1.0 / lu[i][2];
    const std::array<std::size_t, 4> corners{0, 1, n - 2, n - 1};
    z.assign(n, {});
    std::vector<Complex> col(n);
    for (int c = 0; c < 4; ++c) {
      std::fill(col.begin(), col.end(), Complex{});
      col[corners[c]] = 1.0;
      band_solve(col);
      for (std::size_t i = 0; i < n; ++i) z[i][c] = col[i];
    }
    // S = I + V^T Z
    std::array<std::array<Complex, 8>, 4> aug{};
    for (int c = 0; c < 4; ++c) {
      std::vector<Complex> zc(n);
      for (std::size_t i = 0; i < n; ++i) zc[i] = z[i][c];
      const auto vz = corner_product(zc);
      for (int r = 0; r < 4; ++r) aug[r][c] = vz[r] + (r == c ? 1.0 : 0.0);
    }
    for (int r = 0; r < 4; ++r) aug[r][4 + r] = 1.0;
    for (int p = 0; p < 4; ++p) {
      int best = p;
      for (int r = p + 1; r < 4; ++r) {
        if (std::abs(aug[r][p]) > std::abs(aug[best][p])) best = r;
      }
      std::swap(aug[p], aug[best]);
      const Complex piv = aug[p][p];
      for (auto& e : aug[p]) e /= piv;
      for (int r = 0; r < 4; ++r) {
        if (r == p) continue;
        const Complex f = aug[r][p];
        for (int c = 0; c < 8; ++c) aug[r][c] -= f * aug[p][c];
      }
    }
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) s_inv[r][c] = aug[r][4 + c];
    }
  }

  void apply(std::span<Complex> psi, std::vector<Complex>& work) const {
    work.resize(n);
    auto at = [&](std::size_t i) {
      Complex acc{};
      for (int k = 0; k < 5; ++k) acc += rhs[k] * psi[(i + n + k - 2) % n];
      return acc;
    };
    work[0] = at(0);
    work[1] = at(1);
    for (std::size_t i = 2; i + 2 < n; ++i) {
      work[i] = rhs[0] * psi[i - 2] + rhs[1] * psi[i - 1] + rhs[2] * psi[i] +
                rhs[3] * psi[i + 1] + rhs[4] * psi[i + 2];
    }
    work[n - 2] = at(n - 2);
    work[n - 1] = at(n - 1);
    band_solve(work);
    const auto y = corner_product(work);
    std::array<Complex, 4> w{};
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) w[r] += s_inv[r][c] * y[c];
    }
    for (std::size_t i = 0; i < n; ++i) {
      psi[i] = work[i] - (z[i][0] * w[0] + z[i][1] * w[1] + z[i][2] * w[2] +
                          z[i][3] * w[3]);
    }
  }
};

Propagator::Propagator(const SimGrid& grid, std::span<const double> potential,
                       PropagationMethod method, double dt)
    : method_(method), n_(grid.points) {
  grid.validate();
  if (potential.size() != n_) throw std::invalid_argument("potential size mismatch");
  for (double v : potential) {
    if (!std::isfinite(v)) throw NumericalError("non-finite value in potential");
  }
  half_potential_.resize(n_);
  full_potential_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    half_potential_[i] = std::exp(-kI * potential[i] * (0.5 * dt));
    full_potential_[i] = std::exp(-kI * potential[i] * dt);
  }
  if (method == PropagationMethod::spectral) {
    fft_.emplace(n_);
    kinetic_phase_.resize(n_);
    const double dk = 2.0 * std::numbers::pi / grid.length;
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      const double m = j < n_ / 2 ? static_cast<double>(j)
                                  : static_cast<double>(j) - static_cast<double>(n_);
      const double k = m * dk;
      // Stored in the bit-reversed order the scrambled transforms produce.
      kinetic_phase_[fft_->bit_reversed(j)] = std::exp(-kI * (0.5 * k * k * dt)) * inv_n;
    }
  } else {
    banded_ = std::make_unique<Banded>(n_, grid.dx(), dt);
  }
}

Propagator::~Propagator() = default;
Propagator::Propagator(Propagator&&) noexcept = default;
Propagator& Propagator::operator=(Propagator&&) noexcept = default;

void Propagator::kinetic_spectral(std::span<Complex> psi) const {
  fft_->forward_scrambled(psi);
  kernels::complex_mul_inplace(psi, kinetic_phase_);
  fft_->inverse_scrambled(psi);
}

void Propagator::kinetic_real_space(std::span<Complex> psi) const {
  banded_->apply(psi, scratch_);
}

void Propagator::step(std::span<Complex> psi, std::size_t n_steps) const {
  if (psi.size() != n_) throw std::invalid_argument("wave function size mismatch");
  check_finite(psi, "wave function");
  if (n_steps == 0) return;
  // Adjacent half potential steps merge into one full step.
  kernels::complex_mul_inplace(psi, half_potential_);
  for (std::size_t s = 0; s < n_steps; ++s) {
    if (method_ == PropagationMethod::spectral) {
      kinetic_spectral(psi);
    } else {
      kinetic_real_space(psi);
    }
    kernels::complex_mul_inplace(
        psi, s + 1 == n_steps ? half_potential_ : full_potential_);
  }
}

std::vector<Complex> propagate(std::span<const Complex> psi,
                               std::span<const double> potential,
                               const SimGrid& grid, std::size_t n_steps,
                               PropagationMethod method, double dt_sign) {
  if (n_steps < 1) throw std::invalid_argument("n_internal_steps must be >= 1");
  std::vector<Complex> out(psi.begin(), psi.end());
  const Propagator prop(grid, potential, method, dt_sign * grid.dt_internal);
  prop.step(out, n_steps);
  check_finite(out, "propagated wave function");
  return out;
}

}  // namespace qdemu
