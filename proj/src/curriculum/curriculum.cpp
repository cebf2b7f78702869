#include "qdemu/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "qdemu/json_util.hpp"
#include "qdemu/rng.hpp"

namespace qdemu {

using nlohmann::json;

void WindowConfig::validate() const {
  if (width == 0 || width % 2 == 0) throw std::invalid_argument("window width must be odd");
  if (history == 0) throw std::invalid_argument("history must be >= 1");
  if (channels != 2 && channels != 3) throw std::invalid_argument("channels must be 2 or 3");
  for (double p : {spatial_keep_prob, temporal_keep_prob}) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("keep probabilities must be in (0, 1]");
  }
  if (!(barrier_boost > 0.0)) throw std::invalid_argument("barrier_boost must be > 0");
  if (!(v_scale > 0.0)) throw std::invalid_argument("v_scale must be > 0");
}

void to_json(json& j, const WindowConfig& c) {
  j = json{{"width", c.width},
           {"history", c.history},
           {"channels", c.channels},
           {"spatial_keep_prob", c.spatial_keep_prob},
           {"temporal_keep_prob", c.temporal_keep_prob},
           {"barrier_boost", c.barrier_boost},
           {"v_scale", c.v_scale},
           {"seed", c.seed}};
}

void from_json(const json& j, WindowConfig& c) {
  require_known_keys(j, {"width", "history", "channels", "spatial_keep_prob",
                         "temporal_keep_prob", "barrier_boost", "v_scale", "seed"},
                     "window");
  read_optional(j, "width", c.width);
  read_optional(j, "history", c.history);
  read_optional(j, "channels", c.channels);
  read_optional(j, "spatial_keep_prob", c.spatial_keep_prob);
  read_optional(j, "temporal_keep_prob", c.temporal_keep_prob);
  read_optional(j, "barrier_boost", c.barrier_boost);
  read_optional(j, "v_scale", c.v_scale);
  read_optional(j, "seed", c.seed);
}

namespace {

template <class C>
void write_input_rows(const C* const* frames, const double* v, std::size_t n,
                      std::size_t center, const WindowConfig& cfg, float* out) {
  const std::size_t w_count = cfg.width, c_count = cfg.channels;
  const std::size_t first = (center + n - cfg.left() % n) % n;
  for (std::size_t h = 0; h < cfg.history; ++h) {
    const C* f = frames[h];
    float* row = out + h * w_count * c_count;
    std::size_t idx = first;
    for (std::size_t w = 0; w < w_count; ++w) {
      float* px = row + w * c_count;
      px[0] = static_cast<float>(f[idx].real());
      px[1] = static_cast<float>(f[idx].imag());
      if (c_count == 3) px[2] = static_cast<float>(v[idx] / cfg.v_scale);
      if (++idx == n) idx = 0;
    }
  }
}

template <class C>
void write_target_row(const C* frame, std::size_t n, std::size_t center,
                      const WindowConfig& cfg, float* out) {
  std::size_t idx = (center + n - cfg.left() % n) % n;
  for (std::size_t w = 0; w < cfg.width; ++w) {
    out[2 * w] = static_cast<float>(frame[idx].real());
    out[2 * w + 1] = static_cast<float>(frame[idx].imag());
    if (++idx == n) idx = 0;
  }
}

}  // namespace

void write_window_input(const Complex* const* frames, const double* v,
                        std::size_t n, std::size_t center,
                        const WindowConfig& cfg, float* out) {
  write_input_rows(frames, v, n, center, cfg, out);
}

void write_window_target(const Complex* frame, std::size_t n,
                         std::size_t center, const WindowConfig& cfg,
                         float* out) {
  write_target_row(frame, n, center, cfg, out);
}

void write_window_input(const std::complex<float>* const* frames, const double* v,
                        std::size_t n, std::size_t center,
                        const WindowConfig& cfg, float* out) {
  write_input_rows(frames, v, n, center, cfg, out);
}

void write_window_target(const std::complex<float>* frame, std::size_t n,
                         std::size_t center, const WindowConfig& cfg,
                         float* out) {
  write_target_row(frame, n, center, cfg, out);
}

std::size_t FrameStore::bytes() const {
  std::size_t b = 0;
  for (const auto& e : entries) b += e.psi.size() * sizeof(e.psi[0]) + e.v.size() * sizeof(double);
  return b;
}

std::string to_string(DatasetStorage s) {
  return s == DatasetStorage::lazy ? "lazy" : "materialized";
}

DatasetStorage dataset_storage_from_string(const std::string& s) {
  if (s == "materialized") return DatasetStorage::materialized;
  if (s == "lazy") return DatasetStorage::lazy;
  throw std::invalid_argument("unknown dataset storage '" + s + "' (materialized, lazy)");
}

namespace {

bool has_potential(const std::vector<double>& v) {
  return std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; });
}

void check_window_args(const Trajectory& traj, std::size_t center, std::size_t step,
                       const WindowConfig& cfg) {
  if (traj.steps() <= cfg.history || step > traj.steps() - 1 - cfg.history) {
    throw std::out_of_range("window step " + std::to_string(step) +
                            " out of range for " + std::to_string(traj.steps()) +
                            " snapshots and history " + std::to_string(cfg.history));
  }
  if (center >= traj.points()) throw std::out_of_range("window center out of range");
  if (cfg.channels == 2 && has_potential(traj.v)) {
    throw std::invalid_argument("2-channel windows require a zero potential");
  }
}

void write_sample(const Trajectory& traj, std::size_t center, std::size_t step,
                  const WindowConfig& cfg, float* input, float* target) {
  std::vector<const Complex*> frames(cfg.history);
  for (std::size_t h = 0; h < cfg.history; ++h) frames[h] = traj.frame(step + h).data();
  write_window_input(frames.data(), traj.v.data(), traj.points(), center, cfg, input);
  write_window_target(traj.frame(step + cfg.history).data(), traj.points(), center,
                      cfg, target);
}

}  // namespace

WindowSample extract_window(const Trajectory& traj, std::size_t center,
                            std::size_t step, const WindowConfig& cfg,
                            std::uint32_t trajectory_id) {
  cfg.validate();
  check_window_args(traj, center, step, cfg);
  WindowSample s;
  s.input.resize(cfg.input_size());
  s.target.resize(cfg.target_size());
  s.origin = {trajectory_id, static_cast<std::uint32_t>(center),
              static_cast<std::uint32_t>(step)};
  write_sample(traj, center, step, cfg, s.input.data(), s.target.data());
  return s;
}

const float* Dataset::input(std::size_t k) const {
  if (lazy()) throw std::logic_error("lazy dataset has no stored rows; use copy_input");
  return inputs.data() + k * config.input_size();
}

const float* Dataset::target(std::size_t k) const {
  if (lazy()) throw std::logic_error("lazy dataset has no stored rows; use copy_target");
  return targets.data() + k * config.target_size();
}

void Dataset::copy_input(std::size_t k, float* out) const {
  if (!lazy()) {
    std::copy(input(k), input(k) + config.input_size(), out);
    return;
  }
  const WindowOrigin& o = origins[k];
  const FrameStore::Entry& e = frames->entries[o.trajectory];
  const std::complex<float>* f[64];
  if (config.history > 64) throw std::invalid_argument("history above 64");
  for (std::size_t h = 0; h < config.history; ++h) f[h] = e.psi.data() + (o.step + h) * e.points;
  write_window_input(f, e.v.data(), e.points, o.center, config, out);
}

void Dataset::copy_target(std::size_t k, float* out) const {
  if (!lazy()) {
    std::copy(target(k), target(k) + config.target_size(), out);
    return;
  }
  const WindowOrigin& o = origins[k];
  const FrameStore::Entry& e = frames->entries[o.trajectory];
  write_window_target(e.psi.data() + (o.step + config.history) * e.points, e.points, o.center,
                      config, out);
}

WindowSample Dataset::sample(std::size_t k) const {
  WindowSample s;
  s.input.resize(config.input_size());
  s.target.resize(config.target_size());
  copy_input(k, s.input.data());
  copy_target(k, s.target.data());
  s.origin = origins.at(k);
  return s;
}

CurriculumBuilder::CurriculumBuilder(const WindowConfig& cfg, DatasetStorage storage) {
  cfg.validate();
  data_.config = cfg;
  if (storage == DatasetStorage::lazy) store_ = std::make_shared<FrameStore>();
}

void CurriculumBuilder::add(const Trajectory& traj, std::uint32_t id,
                            json provenance) {
  const WindowConfig& cfg = data_.config;
  const std::size_t n = traj.points();
  if (points_ == 0) {
    points_ = n;
    snapshot_dt_ = traj.grid.snapshot_dt();
  } else if (n != points_ || traj.grid.snapshot_dt() != snapshot_dt_) {
    throw std::invalid_argument("trajectories must share N_x and snapshot spacing");
  }
  if (traj.steps() <= cfg.history) {
    throw std::invalid_argument("trajectory shorter than the window history");
  }
  if (cfg.channels == 2 && has_potential(traj.v)) {
    throw std::invalid_argument("2-channel curriculum given a trajectory with a potential");
  }
  if (data_.provenance.size() <= id) data_.provenance.resize(id + 1);
  data_.provenance[id] = std::move(provenance);
  if (store_) {
    if (store_->entries.size() <= id) store_->entries.resize(id + 1);
    FrameStore::Entry& e = store_->entries[id];
    e.points = n;
    e.steps = traj.steps();
    e.psi.assign(traj.psi.begin(), traj.psi.end());
    e.v = traj.v;
  }

  // Circular prefix count of nonzero potential points.
  std::vector<std::size_t> prefix(2 * n + 1, 0);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    prefix[i + 1] = prefix[i] + (traj.v[i % n] != 0.0 ? 1 : 0);
  }
  std::vector<double> keep(n);
  const double base = cfg.spatial_keep_prob * cfg.temporal_keep_prob;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = (i + n - cfg.left() % n) % n;
    const bool overlaps = prefix[lo + cfg.width] - prefix[lo] > 0;
    keep[i] = overlaps ? std::min(1.0, base * cfg.barrier_boost) : base;
  }

  Rng rng(derive_seed(cfg.seed, id));
  const std::size_t in = cfg.input_size(), out = cfg.target_size();
  const std::size_t steps = traj.steps() - cfg.history;
  candidates_ += steps * n;
  for (std::size_t j = 0; j < steps; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      // One draw per candidate keeps the stream layout fixed.
      if (rng.uniform() >= keep[i]) continue;
      if (!store_) {
        const std::size_t k = data_.origins.size();
        data_.inputs.resize((k + 1) * in);
        data_.targets.resize((k + 1) * out);
        write_sample(traj, i, j, cfg, data_.inputs.data() + k * in,
                     data_.targets.data() + k * out);
      }
      data_.origins.push_back({id, static_cast<std::uint32_t>(i),
                               static_cast<std::uint32_t>(j)});
    }
  }
}

void CurriculumBuilder::reserve(std::size_t samples) {
  data_.origins.reserve(samples);
  if (store_) return;
  data_.inputs.reserve(samples * data_.config.input_size());
  data_.targets.reserve(samples * data_.config.target_size());
}

Dataset CurriculumBuilder::finish() && {
  data_.frames = std::move(store_);
  return std::move(data_);
}

Dataset build_curriculum(const std::vector<Trajectory>& trajs,
                         const WindowConfig& cfg, DatasetStorage storage) {
  if (trajs.empty()) throw std::invalid_argument("build_curriculum: no trajectories");
  CurriculumBuilder builder(cfg, storage);
  for (std::size_t t = 0; t < trajs.size(); ++t) {
    builder.add(trajs[t], static_cast<std::uint32_t>(t));
  }
  return std::move(builder).finish();
}

TrainingGrids standard_training_grids() {
  TrainingGrids g;
  for (double x0 : {10.0, 40.0, 70.0}) {
    for (int s = 0; s < 7; ++s) {
      for (int e = 1; e <= 9; ++e) {
        g.free.push_back({x0, 1.0 + 0.5 * s, static_cast<double>(e)});
      }
    }
  }
  for (const PacketSpec& p : g.free) {
    for (int hb = 1; hb <= 14; ++hb) {
      SimCase c;
      char name[96];
      std::snprintf(name, sizeof name, "x%g_s%g_e%g_h%d", p.center, p.spread,
                    p.energy, hb);
      c.name = name;
      c.category = "rect";
      c.packet = p;
      c.potential = RectangularBarrier{static_cast<double>(hb), 7.0, {}};
      g.barrier.push_back(std::move(c));
    }
  }
  return g;
}

std::vector<SimCase> seeded_subset(const std::vector<SimCase>& cases, std::size_t limit,
                                   std::uint64_t seed) {
  if (limit == 0 || limit >= cases.size()) return cases;
  std::vector<std::size_t> idx(cases.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  shuffle(idx.begin(), idx.end(), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  std::vector<SimCase> out;
  out.reserve(limit);
  for (std::size_t i : idx) out.push_back(cases[i]);
  return out;
}

}  // namespace qdemu
