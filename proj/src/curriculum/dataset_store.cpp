#include <stdexcept>

#include "qdemu/curriculum.hpp"
#include "qdemu/io.hpp"
#include "qdemu/trajectory_store.hpp"

namespace qdemu {

namespace fs = std::filesystem;
using nlohmann::json;

void save_dataset(const fs::path& dir, const Dataset& data) {
  fs::create_directories(dir);
  const std::size_t in = data.config.input_size(), out = data.config.target_size();
  if (data.lazy()) {
    for (std::size_t t = 0; t < data.provenance.size(); ++t) {
      if (!data.provenance[t].is_object() || !data.provenance[t].contains("path")) {
        throw std::invalid_argument("lazy dataset: provenance of trajectory " + std::to_string(t) +
                                    " has no \"path\"");
      }
    }
    fs::remove(dir / "samples.f32");
  } else {
    std::vector<float> blob;
    blob.reserve(data.size() * (in + out));
    for (std::size_t k = 0; k < data.size(); ++k) {
      blob.insert(blob.end(), data.input(k), data.input(k) + in);
      blob.insert(blob.end(), data.target(k), data.target(k) + out);
    }
    io::write_f32(dir / "samples.f32", blob);
  }
  std::vector<std::uint32_t> origins;
  origins.reserve(3 * data.size());
  for (const auto& o : data.origins) {
    origins.insert(origins.end(), {o.trajectory, o.center, o.step});
  }
  io::write_u32(dir / "origins.u32", origins);
  json m{{"format_version", kDatasetFormatVersion},
         {"kind", "dataset"},
         {"config", data.config},
         {"count", data.size()},
         {"storage", to_string(data.lazy() ? DatasetStorage::lazy : DatasetStorage::materialized)},
         {"input_shape", {data.config.history, data.config.width, data.config.channels}},
         {"target_shape", {data.config.width, 2}},
         {"layout", {{"samples", "samples.f32"},
                     {"origins", "origins.u32"},
                     {"record", "input then target, float32-le"},
                     {"origin_fields", {"trajectory", "center", "step"}}}},
         {"provenance", data.provenance}};
  io::write_json(dir / "manifest.json", m);
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) {
    throw io::MissingInput(dir / "manifest.json", "curriculum");
  }
  const json m = io::read_json(dir / "manifest.json");
  if (m.value("format_version", 0) != kDatasetFormatVersion || m.value("kind", "") != "dataset") {
    throw std::runtime_error(dir.string() + ": not a dataset of a supported version");
  }
  Dataset data;
  data.config = m.at("config").get<WindowConfig>();
  data.config.validate();
  const std::size_t count = m.at("count").get<std::size_t>();
  const std::size_t in = data.config.input_size(), out = data.config.target_size();
  for (const auto& p : m.at("provenance")) data.provenance.push_back(p);
  const auto origins = io::read_u32(dir / "origins.u32");
  if (origins.size() != 3 * count) {
    throw std::runtime_error(dir.string() + ": origins do not match the manifest");
  }
  data.origins.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    data.origins[k] = {origins[3 * k], origins[3 * k + 1], origins[3 * k + 2]};
  }
  if (dataset_storage_from_string(m.value("storage", "materialized")) == DatasetStorage::lazy) {
    auto store = std::make_shared<FrameStore>();
    for (const auto& p : data.provenance) {
      const Trajectory t = load_trajectory(p.at("path").get<std::string>());
      FrameStore::Entry e;
      e.points = t.points();
      e.steps = t.steps();
      e.psi.assign(t.psi.begin(), t.psi.end());
      e.v = t.v;
      store->entries.push_back(std::move(e));
    }
    for (const auto& o : data.origins) {
      if (o.trajectory >= store->entries.size() ||
          o.step + data.config.history >= store->entries[o.trajectory].steps ||
          o.center >= store->entries[o.trajectory].points) {
        throw std::runtime_error(dir.string() + ": origin outside its source trajectory");
      }
    }
    data.frames = std::move(store);
    return data;
  }
  const auto blob = io::read_f32(dir / "samples.f32");
  if (blob.size() != count * (in + out)) {
    throw std::runtime_error(dir.string() + ": blob sizes do not match the manifest");
  }
  data.inputs.resize(count * in);
  data.targets.resize(count * out);
  for (std::size_t k = 0; k < count; ++k) {
    const float* rec = blob.data() + k * (in + out);
    std::copy(rec, rec + in, data.inputs.begin() + k * in);
    std::copy(rec + in, rec + in + out, data.targets.begin() + k * out);
  }
  return data;
}

}  // namespace qdemu
