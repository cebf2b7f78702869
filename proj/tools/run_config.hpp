#pragma once

// Run configuration: one JSON document layered as defaults <- config file <-
// command-line flags. Every leaf key is also a flag, e.g. --train.epochs 3.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdemu/analysis.hpp"
#include "qdemu/curriculum.hpp"
#include "qdemu/model.hpp"
#include "qdemu/rollout.hpp"
#include "qdemu/sim.hpp"
#include "qdemu/training.hpp"

namespace qdemu::cli {

nlohmann::json default_config();

// Every leaf of default_config() as a dotted path ("grid.points").
std::vector<std::string> leaf_paths(const nlohmann::json& defaults);

// Overlays `patch` onto `base`; keys missing from `base` are rejected. Arrays
// and values replace; objects merge. Keys listed as free-form take any JSON.
void merge_strict(nlohmann::json& base, const nlohmann::json& patch, const std::string& where = "");

// Sets a dotted path from flag text. Text that parses as JSON is used as
// such, anything else as a string.
void set_path(nlohmann::json& cfg, const std::string& path, const std::string& text);

struct RunConfig {
  nlohmann::json raw;  // resolved document
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  PropagationMethod method = PropagationMethod::spectral;
  SimGrid grid;
  WindowConfig window;
  ModelSpec model;  // width / history / channels follow `window`
  TrainConfig train;
  RolloutConfig rollout;

  std::filesystem::path trajectories_dir() const;
  std::filesystem::path dataset_dir() const;
  std::filesystem::path checkpoint_dir() const;
};

// Fills per-stage seeds left null from the top-level seed, then parses.
RunConfig resolve(nlohmann::json cfg);

// <output_dir>/<command>_config.json
void write_snapshot(const RunConfig& rc, const std::string& command);

}  // namespace qdemu::cli
