#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qdemu/error.hpp"
#include "qdemu/kernels.hpp"
#include "qdemu/sim.hpp"

namespace qdemu {

void SimGrid::validate() const {
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw std::invalid_argument("grid length must be positive");
  }
  if (points < 8) throw std::invalid_argument("grid needs at least 8 points");
  if (!(dt_internal != 0.0) || !std::isfinite(dt_internal)) {
    throw std::invalid_argument("internal time step must be nonzero");
  }
  if (snapshot_stride == 0) throw std::invalid_argument("snapshot_stride must be >= 1");
  if (snapshots == 0) throw std::invalid_argument("snapshots must be >= 1");
}

double PacketSpec::wavenumber() const { return std::sqrt(2.0 * energy); }

void PacketSpec::validate(const SimGrid& grid) const {
  if (!(spread > 0.0) || !std::isfinite(spread)) {
    throw std::invalid_argument("packet spread S0 must be > 0");
  }
  if (!(energy >= 0.0) || !std::isfinite(energy)) {
    throw std::invalid_argument("packet energy E0 must be >= 0");
  }
  if (!(center >= 0.0 && center < grid.length)) {
    throw std::invalid_argument("packet center X0 must lie in [0, L_x)");
  }
}

std::vector<Complex> init_packet(const SimGrid& grid, const PacketSpec& spec) {
  grid.validate();
  spec.validate(grid);
  const double k0 = spec.wavenumber();
  const double half = 0.5 * grid.length;
  std::vector<Complex> psi(grid.points);
  for (std::size_t i = 0; i < grid.points; ++i) {
    double d = grid.x(i) - spec.center;
    if (d < -half) d += grid.length;
    if (d >= half) d -= grid.length;
    double envelope = 0.0;
    switch (spec.modulation) {
      case Modulation::gaussian:
        envelope = std::exp(-d * d / (4.0 * spec.spread * spec.spread));
        break;
      case Modulation::triangle:
        envelope = std::max(0.0, 1.0 - std::abs(d) / (2.0 * spec.spread));
        break;
      case Modulation::square:
        envelope = (d >= -2.0 * spec.spread && d < 2.0 * spec.spread) ? 1.0 : 0.0;
        break;
    }
    psi[i] = envelope * std::polar(1.0, k0 * (spec.center + d));
  }
  const double norm = probability(psi, grid.dx());
  if (!(norm > 0.0)) throw std::invalid_argument("packet has zero norm on this grid");
  const double scale = 1.0 / std::sqrt(norm);
  for (auto& z : psi) z *= scale;
  return psi;
}

double probability(std::span<const Complex> psi, double dx) {
  return kernels::norm_sq(psi) * dx;
}

double Trajectory::max_norm_drift() const {
  double worst = 0.0;
  for (std::size_t j = 0; j < grid.snapshots; ++j) {
    worst = std::max(worst, std::abs(probability(frame(j), grid.dx()) - 1.0));
  }
  return worst;
}

Trajectory run_simulation(const PacketSpec& packet,
                          const PotentialSpec& potential, const SimGrid& grid,
                          PropagationMethod method) {
  constexpr double kDriftLimit = 1e-6;
  Trajectory traj;
  traj.grid = grid;
  traj.packet = packet;
  traj.potential = potential;
  traj.method = method;
  traj.v = render_potential(grid, potential);
  std::vector<Complex> psi = init_packet(grid, packet);
  const Propagator prop(grid, traj.v, method, grid.dt_internal);
  traj.psi.resize(grid.snapshots * grid.points);
  for (std::size_t j = 0; j < grid.snapshots; ++j) {
    if (j > 0) prop.step(psi, grid.snapshot_stride);
    const double norm = probability(psi, grid.dx());
    if (!std::isfinite(norm)) {
      throw NumericalError("propagation produced NaN at snapshot " + std::to_string(j));
    }
    if (std::abs(norm - 1.0) > kDriftLimit) {
      throw NumericalError("norm drift " + std::to_string(norm - 1.0) +
                           " at snapshot " + std::to_string(j) +
                           " exceeds 1e-6; check dt_internal and the grid");
    }
    std::copy(psi.begin(), psi.end(), traj.psi.begin() + j * grid.points);
  }
  return traj;
}

}  // namespace qdemu
