#pragma once

#include <filesystem>

#include "qdemu/sim.hpp"

namespace qdemu {

inline constexpr int kTrajectoryFormatVersion = 1;

// <dir>/manifest.json, psi_re.f32, psi_im.f32 ([N_t][N_x], time-major) and
// potential.f32 ([N_x]). Values are stored as 32-bit floats, so a loaded
// trajectory re-saves to identical bytes.
void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj);
Trajectory load_trajectory(const std::filesystem::path& dir);
bool trajectory_complete(const std::filesystem::path& dir);

nlohmann::json trajectory_manifest(const Trajectory& traj);

}  // namespace qdemu
