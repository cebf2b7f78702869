#pragma once

// Windowed training samples distilled from trajectories.
//
// Input layout of one sample, H x W x C row-major: index (h * W + w) * C + c,
// h = 0 the oldest step, channels (Re psi, Im psi, v / v_scale). Targets are
// W x 2: index w * 2 + {0: Re, 1: Im}.

#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdemu/sim.hpp"

namespace qdemu {

struct WindowConfig {
  std::size_t width = 23;
  std::size_t history = 4;
  std::size_t channels = 3;
  double spatial_keep_prob = 0.1;
  double temporal_keep_prob = 0.9;
  double barrier_boost = 5.0;
  double v_scale = 15.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t input_size() const { return history * width * channels; }
  std::size_t target_size() const { return width * 2; }
  // Offsets covered around a center: [-left, +right].
  std::size_t left() const { return width / 2; }
  std::size_t right() const { return (width - 1) / 2; }
};

void to_json(nlohmann::json& j, const WindowConfig& c);
void from_json(const nlohmann::json& j, WindowConfig& c);

struct WindowOrigin {
  std::uint32_t trajectory = 0;
  std::uint32_t center = 0;
  std::uint32_t step = 0;  // first input step j; target is step j + H
  bool operator==(const WindowOrigin&) const = default;
};

struct WindowSample {
  std::vector<float> input;   // [H][W][C]
  std::vector<float> target;  // [W][2]
  WindowOrigin origin;
};

// One model input row centered at `center`; frames[h] points at N_x values,
// oldest first. `v` may be null when cfg.channels == 2.
void write_window_input(const Complex* const* frames, const double* v,
                        std::size_t n, std::size_t center,
                        const WindowConfig& cfg, float* out);
void write_window_target(const Complex* frame, std::size_t n,
                         std::size_t center, const WindowConfig& cfg,
                         float* out);
// Same, from single-precision frames. Rows match the double versions exactly
// since both round each component to float once.
void write_window_input(const std::complex<float>* const* frames, const double* v,
                        std::size_t n, std::size_t center,
                        const WindowConfig& cfg, float* out);
void write_window_target(const std::complex<float>* frame, std::size_t n,
                         std::size_t center, const WindowConfig& cfg,
                         float* out);

WindowSample extract_window(const Trajectory& traj, std::size_t center,
                            std::size_t step, const WindowConfig& cfg,
                            std::uint32_t trajectory_id = 0);

// Single-precision copies of source trajectories, indexed by trajectory id.
// Lazy datasets cut their windows from here on demand.
struct FrameStore {
  struct Entry {
    std::size_t points = 0, steps = 0;
    std::vector<std::complex<float>> psi;  // [steps][points]
    std::vector<double> v;                 // [points]
  };
  std::vector<Entry> entries;

  std::size_t bytes() const;
};

enum class DatasetStorage { materialized, lazy };
std::string to_string(DatasetStorage s);
DatasetStorage dataset_storage_from_string(const std::string& s);

struct Dataset {
  WindowConfig config;
  std::vector<float> inputs;   // [size][input_size], empty when lazy
  std::vector<float> targets;  // [size][target_size], empty when lazy
  std::vector<WindowOrigin> origins;
  std::vector<nlohmann::json> provenance;  // source manifest per trajectory id
  std::shared_ptr<const FrameStore> frames;  // set when lazy

  std::size_t size() const { return origins.size(); }
  bool lazy() const { return frames != nullptr; }
  // Row pointers; materialized datasets only.
  const float* input(std::size_t k) const;
  const float* target(std::size_t k) const;
  // Either storage.
  void copy_input(std::size_t k, float* out) const;
  void copy_target(std::size_t k, float* out) const;
  WindowSample sample(std::size_t k) const;
};

// Streaming form of build_curriculum: trajectories are added one at a time
// and can be dropped afterwards. Each trajectory draws from its own stream
// derived from (seed, id), so the result does not depend on insertion order
// of other trajectories.
class CurriculumBuilder {
 public:
  explicit CurriculumBuilder(const WindowConfig& cfg,
                             DatasetStorage storage = DatasetStorage::materialized);

  void add(const Trajectory& traj, std::uint32_t id,
           nlohmann::json provenance = nullptr);
  void reserve(std::size_t samples);
  std::size_t candidates() const { return candidates_; }
  Dataset finish() &&;

 private:
  Dataset data_;
  std::shared_ptr<FrameStore> store_;  // lazy mode
  std::size_t candidates_ = 0;
  std::size_t points_ = 0;
  double snapshot_dt_ = 0.0;
};

Dataset build_curriculum(const std::vector<Trajectory>& trajs,
                         const WindowConfig& cfg,
                         DatasetStorage storage = DatasetStorage::materialized);

// A named simulation case.
struct SimCase {
  std::string name;
  std::string category;
  PacketSpec packet;
  PotentialSpec potential;
};

struct TrainingGrids {
  std::vector<PacketSpec> free;  // 189
  std::vector<SimCase> barrier;  // 2646
};

// X0 in {10, 40, 70} x S0 in {1, 1.5, ..., 4} x E0 in {1, ..., 9}; the
// barrier grid crosses those packets with H_b in {1, ..., 14}, W_b = 7.
TrainingGrids standard_training_grids();

// `limit` cases drawn without replacement by a seeded shuffle, returned in
// their original order. limit 0 or >= size keeps everything.
std::vector<SimCase> seeded_subset(const std::vector<SimCase>& cases, std::size_t limit,
                                   std::uint64_t seed);

// <dir>/manifest.json, samples.f32 ([n][input_size + target_size]) and
// origins.u32 ([n][3]). Lazy datasets store no samples.f32; they are rebuilt
// from the trajectory directories named by provenance[id]["path"].
inline constexpr int kDatasetFormatVersion = 1;
void save_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace qdemu
