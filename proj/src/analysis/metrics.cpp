#include "qdemu/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace qdemu {

double mae(std::span<const Complex> pred, std::span<const Complex> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("mae: frame lengths differ");
  if (pred.empty()) throw std::invalid_argument("mae: empty frames");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double normalized_correlation(std::span<const Complex> pred,
                              std::span<const Complex> truth) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("normalized_correlation: frame lengths differ");
  }
  double overlap = 0.0, np = 0.0, nt = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    // Re(conj(p) t)
    overlap += pred[i].real() * truth[i].real() + pred[i].imag() * truth[i].imag();
    np += std::norm(pred[i]);
    nt += std::norm(truth[i]);
  }
  if (np == 0.0 || nt == 0.0) {
    throw std::invalid_argument("normalized_correlation: zero-norm frame");
  }
  return overlap / (std::sqrt(np) * std::sqrt(nt));
}

}  // namespace qdemu
