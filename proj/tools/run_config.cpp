#include "run_config.hpp"

#include <set>
#include <stdexcept>

#include "qdemu/io.hpp"

namespace qdemu::cli {

using nlohmann::json;

namespace {

// Values that are documents of their own and are not checked key by key.
const std::set<std::string> kFreeForm = {"simulation.cases", "rollout_case.case", "sweep.base"};

json strip(json j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) j.erase(k);
  return j;
}

}  // namespace

json default_config() {
  json window = WindowConfig{};
  window["seed"] = nullptr;
  json train = TrainConfig{};
  train["seed"] = nullptr;
  return {
      {"output_dir", "run"},
      {"seed", 0},
      {"workers", 0},
      {"method", "spectral"},
      {"grid", SimGrid{}},
      // set: barrier | free | custom; limit > 0 keeps a seeded subset.
      {"simulation", {{"set", "barrier"}, {"limit", 0}, {"subset_seed", 0}, {"cases", json::array()}}},
      {"window", window},
      // lazy: windows are cut from in-memory trajectories during training.
      {"curriculum", {{"storage", "materialized"}}},
      {"model", strip(json(ModelSpec{}), {"width", "history", "channels"})},
      {"train", train},
      {"rollout", RolloutConfig{}},
      {"rollout_case", {{"suite", "rect"}, {"name", "rect1_h3_w7"}, {"case", nullptr}}},
      {"evaluate", {{"suite", "standard"}, {"oracle", false}}},
      {"sweep",
       {{"kind", "generalization"},
        {"axis", "E0"},
        {"values", json::array()},
        {"checkpoints", json::array()},
        {"base", nullptr},
        {"hyper_axis", "H"},
        {"hyper_values", {1, 2, 3, 4, 5, 6}},
        {"n_seeds", 5}}},
      {"interpret", {{"samples", 200}, {"free_region_only", false}, {"control", true}}},
      {"reproduce", {{"models", {"linear", "dense", "conv", "gru"}}}},
      {"paths", {{"trajectories", ""}, {"dataset", ""}, {"checkpoint", ""}}},
  };
}

std::vector<std::string> leaf_paths(const json& defaults) {
  std::vector<std::string> out;
  auto walk = [&](auto& self, const json& j, const std::string& prefix) -> void {
    for (const auto& [k, v] : j.items()) {
      const std::string p = prefix.empty() ? k : prefix + "." + k;
      if (v.is_object() && !kFreeForm.count(p)) {
        self(self, v, p);
      } else {
        out.push_back(p);
      }
    }
  };
  walk(walk, defaults, "");
  return out;
}

void merge_strict(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw std::invalid_argument("config" + where + ": expected an object");
  for (const auto& [k, v] : patch.items()) {
    const std::string p = where.empty() ? k : where + "." + k;
    if (!base.contains(k)) throw std::invalid_argument("unknown config key '" + p + "'");
    json& slot = base[k];
    if (slot.is_object() && v.is_object() && !kFreeForm.count(p)) {
      merge_strict(slot, v, p);
    } else {
      slot = v;
    }
  }
}

void set_path(json& cfg, const std::string& path, const std::string& text) {
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json patch = value;
  std::size_t end = path.size();
  while (true) {
    const std::size_t dot = path.rfind('.', end - 1);
    const std::string key = path.substr(dot == std::string::npos ? 0 : dot + 1,
                                        end - (dot == std::string::npos ? 0 : dot + 1));
    patch = json{{key, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  merge_strict(cfg, patch);
}

RunConfig resolve(json cfg) {
  RunConfig rc;
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  if (cfg["window"]["seed"].is_null()) cfg["window"]["seed"] = seed;
  if (cfg["train"]["seed"].is_null()) cfg["train"]["seed"] = seed;
  rc.raw = cfg;
  rc.output_dir = cfg.at("output_dir").get<std::string>();
  rc.seed = seed;
  rc.workers = cfg.at("workers").get<std::size_t>();
  rc.method = propagation_method_from_string(cfg.at("method").get<std::string>());
  rc.grid = cfg.at("grid").get<SimGrid>();
  rc.grid.validate();
  rc.window = cfg.at("window").get<WindowConfig>();
  rc.window.validate();
  json m = cfg.at("model");
  m["width"] = rc.window.width;
  m["history"] = rc.window.history;
  m["channels"] = rc.window.channels;
  rc.model = m.get<ModelSpec>();
  rc.model.validate();
  rc.train = cfg.at("train").get<TrainConfig>();
  rc.rollout = cfg.at("rollout").get<RolloutConfig>();
  rc.rollout.validate();
  return rc;
}

std::filesystem::path RunConfig::trajectories_dir() const {
  const auto p = raw["paths"]["trajectories"].get<std::string>();
  return p.empty() ? output_dir / "trajectories" : std::filesystem::path(p);
}

std::filesystem::path RunConfig::dataset_dir() const {
  const auto p = raw["paths"]["dataset"].get<std::string>();
  return p.empty() ? output_dir / "dataset" : std::filesystem::path(p);
}

std::filesystem::path RunConfig::checkpoint_dir() const {
  const auto p = raw["paths"]["checkpoint"].get<std::string>();
  return p.empty() ? output_dir / "checkpoint" : std::filesystem::path(p);
}

void write_snapshot(const RunConfig& rc, const std::string& command) {
  std::filesystem::create_directories(rc.output_dir);
  io::write_json(rc.output_dir / (command + "_config.json"), rc.raw);
}

}  // namespace qdemu::cli
