#pragma once

// Ground-truth 1D time-dependent Schroedinger dynamics (atomic units,
// hbar = m = 1) on a periodic grid x_i = i * dx.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "qdemu/fft.hpp"

namespace qdemu {

using Complex = std::complex<double>;

struct SimGrid {
  double length = 100.0;
  std::size_t points = 1024;
  double dt_internal = 0.0005;
  std::size_t snapshot_stride = 200;
  std::size_t snapshots = 500;

  double dx() const { return length / static_cast<double>(points); }
  double snapshot_dt() const {
    return dt_internal * static_cast<double>(snapshot_stride);
  }
  double x(std::size_t i) const { return static_cast<double>(i) * dx(); }
  void validate() const;
};

enum class Modulation { gaussian, triangle, square };

struct PacketSpec {
  double center = 40.0;  // X0
  double spread = 2.0;   // S0
  double energy = 5.0;   // E0
  Modulation modulation = Modulation::gaussian;

  double wavenumber() const;  // sqrt(2 E0)
  void validate(const SimGrid& grid) const;
};

// Shapes. An unset center means the box center.
struct NoPotential {};
struct RectangularBarrier {
  double height = 14.0;
  double width = 7.0;
  std::optional<double> center;
};
struct MultiRectangular {
  std::vector<RectangularBarrier> barriers;
};
// Stacked rectangles of equal height, widths shrinking linearly to the top.
struct PyramidBarrier {
  int steps = 3;
  double base_width = 12.0;
  double height = 9.0;
  std::optional<double> center;
};
struct HalfCircleBarrier {
  double radius = 5.0;
  double peak = 8.0;
  std::optional<double> center;
};
// v = curvature * (x - vertex)^2 with the periodic distance to the vertex.
struct QuadraticPotential {
  double curvature = 0.005;
  double vertex = 50.0;
};
// Renders v = -depth over the width.
struct RectangularWell {
  double depth = 5.0;
  double width = 7.0;
  std::optional<double> center;
};
struct PiecewiseSamples {
  std::vector<double> values;
};

using PotentialSpec =
    std::variant<NoPotential, RectangularBarrier, MultiRectangular,
                 PyramidBarrier, HalfCircleBarrier, QuadraticPotential,
                 RectangularWell, PiecewiseSamples>;

std::string potential_tag(const PotentialSpec& spec);

enum class PropagationMethod { spectral, tridiagonal };

std::vector<Complex> init_packet(const SimGrid& grid, const PacketSpec& spec);
std::vector<double> render_potential(const SimGrid& grid,
                                     const PotentialSpec& spec);

// Second-order splitting exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2) with a fixed
// step. `spectral` applies the kinetic factor exactly in wavenumber space;
// `tridiagonal` applies a Cayley (Crank-Nicolson) step of the compact
// sixth-order finite-difference Laplacian in real space.
class Propagator {
 public:
  Propagator(const SimGrid& grid, std::span<const double> potential,
             PropagationMethod method, double dt);
  ~Propagator();
  Propagator(Propagator&&) noexcept;
  Propagator& operator=(Propagator&&) noexcept;

  void step(std::span<Complex> psi, std::size_t n_steps) const;
  PropagationMethod method() const { return method_; }

 private:
  struct Banded;

  void kinetic_spectral(std::span<Complex> psi) const;
  void kinetic_real_space(std::span<Complex> psi) const;

  PropagationMethod method_;
  std::size_t n_;
  std::vector<Complex> half_potential_;
  std::vector<Complex> full_potential_;
  std::vector<Complex> kinetic_phase_;  // includes the 1/N of the inverse FFT
  std::optional<FftPlan> fft_;
  std::unique_ptr<Banded> banded_;
  mutable std::vector<Complex> scratch_;
};

std::vector<Complex> propagate(std::span<const Complex> psi,
                               std::span<const double> potential,
                               const SimGrid& grid, std::size_t n_steps,
                               PropagationMethod method,
                               double dt_sign = 1.0);

// sum_i |psi_i|^2 dx
double probability(std::span<const Complex> psi, double dx);

struct Trajectory {
  SimGrid grid;
  PacketSpec packet;
  PotentialSpec potential;
  PropagationMethod method = PropagationMethod::spectral;
  std::uint64_t seed = 0;
  std::vector<Complex> psi;  // [snapshots][points]
  std::vector<double> v;     // [points]

  std::size_t steps() const { return grid.snapshots; }
  std::size_t points() const { return grid.points; }
  std::span<const Complex> frame(std::size_t j) const {
    return {psi.data() + j * grid.points, grid.points};
  }
  double max_norm_drift() const;
};

Trajectory run_simulation(
    const PacketSpec& packet, const PotentialSpec& potential,
    const SimGrid& grid,
    PropagationMethod method = PropagationMethod::spectral);

// JSON forms used by manifests and config files.
void to_json(nlohmann::json& j, const SimGrid& g);
void from_json(const nlohmann::json& j, SimGrid& g);
void to_json(nlohmann::json& j, const PacketSpec& p);
void from_json(const nlohmann::json& j, PacketSpec& p);
nlohmann::json potential_to_json(const PotentialSpec& spec);
PotentialSpec potential_from_json(const nlohmann::json& j);
std::string to_string(PropagationMethod m);
PropagationMethod propagation_method_from_string(const std::string& s);
std::string to_string(Modulation m);
Modulation modulation_from_string(const std::string& s);

}  // namespace qdemu
