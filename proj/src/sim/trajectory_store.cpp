#include "qdemu/trajectory_store.hpp"

#include <stdexcept>

#include "qdemu/io.hpp"

namespace qdemu {

namespace fs = std::filesystem;
using nlohmann::json;

json trajectory_manifest(const Trajectory& traj) {
  return json{{"format_version", kTrajectoryFormatVersion},
              {"kind", "trajectory"},
              {"grid", traj.grid},
              {"packet", traj.packet},
              {"potential", potential_to_json(traj.potential)},
              {"method", to_string(traj.method)},
              {"seed", traj.seed},
              {"layout", {{"psi_re", "psi_re.f32"},
                          {"psi_im", "psi_im.f32"},
                          {"potential", "potential.f32"},
                          {"shape", {traj.grid.snapshots, traj.grid.points}},
                          {"dtype", "float32-le"}}}};
}

void save_trajectory(const fs::path& dir, const Trajectory& traj) {
  fs::create_directories(dir);
  const std::size_t count = traj.grid.snapshots * traj.grid.points;
  if (traj.psi.size() != count || traj.v.size() != traj.grid.points) {
    throw std::invalid_argument("trajectory arrays do not match its grid");
  }
  std::vector<float> re(count), im(count), v(traj.grid.points);
  for (std::size_t i = 0; i < count; ++i) {
    re[i] = static_cast<float>(traj.psi[i].real());
    im[i] = static_cast<float>(traj.psi[i].imag());
  }
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(traj.v[i]);
  io::write_f32(dir / "psi_re.f32", re);
  io::write_f32(dir / "psi_im.f32", im);
  io::write_f32(dir / "potential.f32", v);
  // Manifest last: its presence marks a complete directory.
  io::write_json(dir / "manifest.json", trajectory_manifest(traj));
}

bool trajectory_complete(const fs::path& dir) {
  return fs::exists(dir / "manifest.json") && fs::exists(dir / "psi_re.f32") &&
         fs::exists(dir / "psi_im.f32") && fs::exists(dir / "potential.f32");
}

Trajectory load_trajectory(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) {
    throw io::MissingInput(dir / "manifest.json", "simulate");
  }
  const json m = io::read_json(dir / "manifest.json");
  if (m.value("format_version", 0) != kTrajectoryFormatVersion) {
    throw std::runtime_error(dir.string() + ": unsupported trajectory format version");
  }
  Trajectory traj;
  traj.grid = m.at("grid").get<SimGrid>();
  traj.packet = m.at("packet").get<PacketSpec>();
  traj.potential = potential_from_json(m.at("potential"));
  traj.method = propagation_method_from_string(m.at("method").get<std::string>());
  traj.seed = m.value("seed", std::uint64_t{0});
  const auto re = io::read_f32(dir / "psi_re.f32");
  const auto im = io::read_f32(dir / "psi_im.f32");
  const auto v = io::read_f32(dir / "potential.f32");
  const std::size_t count = traj.grid.snapshots * traj.grid.points;
  if (re.size() != count || im.size() != count || v.size() != traj.grid.points) {
    throw std::runtime_error(dir.string() + ": blob sizes do not match the manifest");
  }
  traj.psi.resize(count);
  for (std::size_t i = 0; i < count; ++i) traj.psi[i] = {re[i], im[i]};
  traj.v.assign(v.begin(), v.end());
  return traj;
}

}  // namespace qdemu
