#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qdemu {

// In-place iterative radix-2 FFT for power-of-two sizes.
// forward: X_k = sum_n x_n exp(-2 pi i k n / N); inverse omits the 1/N factor.
// The *_scrambled pair skips the bit-reversal permutation: the forward output
// and the inverse input are in bit-reversed order, which is all a pointwise
// spectral multiply needs.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const { return n_; }
  void forward(std::span<std::complex<double>> data) const;
  void inverse(std::span<std::complex<double>> data) const;

  void forward_scrambled(std::span<std::complex<double>> data) const;
  void inverse_scrambled(std::span<std::complex<double>> data) const;
  std::size_t bit_reversed(std::size_t i) const { return bitrev_[i]; }

 private:
  void check(std::span<std::complex<double>> data) const;
  void permute(std::span<std::complex<double>> data) const;

  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<double>> forward_tw_;
  std::vector<std::complex<double>> inverse_tw_;
};

bool is_power_of_two(std::size_t n);

}  // namespace qdemu
