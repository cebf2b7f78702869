#pragma once

#include <span>

#include "qdemu/sim.hpp"

namespace qdemu {

// (1/N) sum |pred_i - truth_i|, complex modulus.
double mae(std::span<const Complex> pred, std::span<const Complex> truth);

// Re(sum conj(pred_i) truth_i) / (|pred| |truth|). The real part, so a global
// phase error counts against the prediction.
double normalized_correlation(std::span<const Complex> pred,
                              std::span<const Complex> truth);

}  // namespace qdemu
