#include <cmath>
#include <stdexcept>

#include "qdemu/sim.hpp"

namespace qdemu {
namespace {

// Signed periodic displacement x - c wrapped to [-L/2, L/2).
double wrap(double d, double length) {
  d = std::fmod(d, length);
  if (d < -0.5 * length) d += length;
  if (d >= 0.5 * length) d -= length;
  return d;
}

double center_or_mid(const std::optional<double>& c, const SimGrid& grid) {
  return c.value_or(0.5 * grid.length);
}

// Adds `height` on the half-open span [c - w/2, c + w/2).
void add_box(const SimGrid& grid, double center, double width, double height,
             std::vector<double>& v) {
  if (!(width >= 0.0)) throw std::invalid_argument("barrier width must be >= 0");
  for (std::size_t i = 0; i < grid.points; ++i) {
    const double d = wrap(grid.x(i) - center, grid.length);
    if (d >= -0.5 * width && d < 0.5 * width) v[i] += height;
  }
}

struct Renderer {
  const SimGrid& grid;
  std::vector<double>& v;

  void operator()(const NoPotential&) const {}
  void operator()(const RectangularBarrier& b) const {
    add_box(grid, center_or_mid(b.center, grid), b.width, b.height, v);
  }
  void operator()(const MultiRectangular& m) const {
    for (const auto& b : m.barriers) (*this)(b);
  }
  void operator()(const PyramidBarrier& p) const {
    if (p.steps < 1) throw std::invalid_argument("pyramid needs >= 1 step");
    const double c = center_or_mid(p.center, grid);
    const double rise = p.height / p.steps;
    for (int s = 0; s < p.steps; ++s) {
      const double w = p.base_width * static_cast<double>(p.steps - s) / p.steps;
      add_box(grid, c, w, rise, v);
    }
  }
  void operator()(const HalfCircleBarrier& h) const {
    if (!(h.radius > 0.0)) throw std::invalid_argument("half-circle radius must be > 0");
    const double c = center_or_mid(h.center, grid);
    for (std::size_t i = 0; i < grid.points; ++i) {
      const double d = wrap(grid.x(i) - c, grid.length) / h.radius;
      if (d * d < 1.0) v[i] += h.peak * std::sqrt(1.0 - d * d);
    }
  }
  void operator()(const QuadraticPotential& q) const {
    for (std::size_t i = 0; i < grid.points; ++i) {
      const double d = wrap(grid.x(i) - q.vertex, grid.length);
      v[i] += q.curvature * d * d;
    }
  }
  void operator()(const RectangularWell& w) const {
    add_box(grid, center_or_mid(w.center, grid), w.width, -w.depth, v);
  }
  void operator()(const PiecewiseSamples& p) const {
    if (p.values.size() != grid.points) {
      throw std::invalid_argument("piecewise_samples has " +
                                  std::to_string(p.values.size()) +
                                  " values, grid has " +
                                  std::to_string(grid.points));
    }
    for (std::size_t i = 0; i < grid.points; ++i) v[i] += p.values[i];
  }
};

}  // namespace

std::vector<double> render_potential(const SimGrid& grid,
                                     const PotentialSpec& spec) {
  std::vector<double> v(grid.points, 0.0);
  std::visit(Renderer{grid, v}, spec);
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("potential is not finite");
  }
  return v;
}

std::string potential_tag(const PotentialSpec& spec) {
  static const char* const tags[] = {
      "none",       "rectangular", "multi_rectangular", "pyramid",
      "half_circle", "quadratic",  "rectangular_well",  "piecewise_samples"};
  return tags[spec.index()];
}

}  // namespace qdemu
