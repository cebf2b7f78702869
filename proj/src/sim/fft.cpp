#include "qdemu/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "qdemu/kernels.hpp"

namespace qdemu {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("FFT size must be a power of two, got " +
                                std::to_string(n));
  }
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  bitrev_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
    bitrev_[i] = r;
  }
  // Stage with half-size h at offset n - 2h.
  forward_tw_.resize(n > 1 ? n - 1 : 1);
  inverse_tw_.resize(forward_tw_.size());
  for (std::size_t h = 1; h < n; h *= 2) {
    for (std::size_t j = 0; j < h; ++j) {
      const double angle = -std::numbers::pi * static_cast<double>(j) /
                           static_cast<double>(h);
      forward_tw_[n - 2 * h + j] = {std::cos(angle), std::sin(angle)};
      inverse_tw_[n - 2 * h + j] = {std::cos(angle), -std::sin(angle)};
    }
  }
}

void FftPlan::check(std::span<std::complex<double>> data) const {
  if (data.size() != n_) throw std::invalid_argument("FFT size mismatch");
}

void FftPlan::permute(std::span<std::complex<double>> data) const {
  for (std::size_t i = 0; i < n_; ++i) {
    if (bitrev_[i] > i) std::swap(data[i], data[bitrev_[i]]);
  }
}

void FftPlan::forward_scrambled(std::span<std::complex<double>> data) const {
  check(data);
  kernels::active().fft_dif(data.data(), n_, forward_tw_.data());
}

void FftPlan::inverse_scrambled(std::span<std::complex<double>> data) const {
  check(data);
  kernels::active().fft_dit(data.data(), n_, inverse_tw_.data());
}

void FftPlan::forward(std::span<std::complex<double>> data) const {
  forward_scrambled(data);
  permute(data);
}

void FftPlan::inverse(std::span<std::complex<double>> data) const {
  check(data);
  permute(data);
  inverse_scrambled(data);
}

}  // namespace qdemu
