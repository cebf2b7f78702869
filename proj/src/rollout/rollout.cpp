#include "qdemu/rollout.hpp"

#include <cmath>
#include <deque>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "qdemu/error.hpp"
#include "qdemu/io.hpp"
#include "qdemu/json_util.hpp"
#include "qdemu/metrics.hpp"
#include "qdemu/trajectory_store.hpp"

namespace qdemu {

void RolloutConfig::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("rollout: delta must be > 0");
  if (n_steps == 0) throw std::invalid_argument("rollout: n_steps must be >= 1");
  if (seed_steps == 0) throw std::invalid_argument("rollout: seed_steps must be >= 1");
  if (stride == 0) throw std::invalid_argument("rollout: stride must be >= 1");
  if (batch == 0) throw std::invalid_argument("rollout: batch must be >= 1");
}

void to_json(nlohmann::json& j, const RolloutConfig& c) {
  j = {{"delta", c.delta},           {"n_steps", c.n_steps},
       {"seed_steps", c.seed_steps}, {"stride", c.stride},
       {"renormalize", c.renormalize}, {"batch", c.batch}};
}

void from_json(const nlohmann::json& j, RolloutConfig& c) {
  require_known_keys(j, {"delta", "n_steps", "seed_steps", "stride", "renormalize", "batch"},
                     "rollout config");
  read_optional(j, "delta", c.delta);
  read_optional(j, "n_steps", c.n_steps);
  read_optional(j, "seed_steps", c.seed_steps);
  read_optional(j, "stride", c.stride);
  read_optional(j, "renormalize", c.renormalize);
  read_optional(j, "batch", c.batch);
}

void OracleModel::predict(const StepContext& ctx, std::span<const std::size_t> centers,
                          const float*, float* outputs) const {
  if (ctx.truth == nullptr) throw std::invalid_argument("oracle model needs a ground-truth trajectory");
  if (ctx.target_step >= ctx.truth->steps()) {
    throw std::out_of_range("oracle model: step " + std::to_string(ctx.target_step) +
                            " beyond the ground truth");
  }
  const auto frame = ctx.truth->frame(ctx.target_step);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    write_window_target(frame.data(), frame.size(), centers[i], cfg_,
                        outputs + i * cfg_.target_size());
  }
}

NeuralModel::NeuralModel(ModelSpec spec, ParameterSet params, double v_scale)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (params_.count() != parameter_count(spec_)) {
    throw std::invalid_argument("parameters do not match the model spec");
  }
  cfg_.width = spec_.width;
  cfg_.history = spec_.history;
  cfg_.channels = spec_.channels;
  cfg_.v_scale = v_scale;
  cfg_.validate();
}

void NeuralModel::predict(const StepContext&, std::span<const std::size_t> centers,
                          const float* inputs, float* outputs) const {
  qdemu::predict(spec_, params_, inputs, centers.size(), outputs);
}

std::vector<double> reassembly_weights(const WindowConfig& w, double delta) {
  const std::size_t left = w.left();
  std::vector<double> out(w.width);
  double sum = 0.0;
  for (std::size_t i = 0; i < w.width; ++i) {
    const double k = static_cast<double>(i) - static_cast<double>(left);
    out[i] = std::exp(-k * k / (2.0 * delta * delta));
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

std::vector<Complex> predict_step(const WindowModel& model,
                                  std::span<const std::span<const Complex>> frames,
                                  std::span<const double> v, const RolloutConfig& cfg,
                                  const StepContext& ctx) {
  cfg.validate();
  const WindowConfig& w = model.window();
  if (frames.size() != w.history) {
    throw std::invalid_argument("predict_step: expected " + std::to_string(w.history) + " frames");
  }
  const std::size_t n = frames[0].size();
  for (const auto& f : frames) {
    if (f.size() != n) throw std::invalid_argument("predict_step: frames differ in length");
  }
  if (n < w.width) throw std::invalid_argument("predict_step: grid smaller than the window");
  if (w.channels == 3 && v.size() != n) {
    throw std::invalid_argument("predict_step: potential length differs from the frames");
  }
  if (cfg.stride > w.width) throw std::invalid_argument("predict_step: stride exceeds the window width");

  std::vector<const Complex*> ptrs(frames.size());
  for (std::size_t h = 0; h < frames.size(); ++h) ptrs[h] = frames[h].data();
  const double* vp = w.channels == 3 ? v.data() : nullptr;

  const std::size_t n_centers = (n + cfg.stride - 1) / cfg.stride;
  std::vector<std::size_t> centers(n_centers);
  for (std::size_t c = 0; c < n_centers; ++c) centers[c] = c * cfg.stride;

  const std::size_t in_size = w.input_size(), out_size = w.target_size();
  // Indexed by center, not by call, so chunking never changes the result.
  std::vector<float> est(n * out_size, 0.0f);
  std::vector<float> in(std::min(cfg.batch, n_centers) * in_size);
  std::vector<float> out(std::min(cfg.batch, n_centers) * out_size);
  for (std::size_t c0 = 0; c0 < n_centers; c0 += cfg.batch) {
    const std::size_t count = std::min(cfg.batch, n_centers - c0);
    for (std::size_t i = 0; i < count; ++i) {
      write_window_input(ptrs.data(), vp, n, centers[c0 + i], w, in.data() + i * in_size);
    }
    model.predict(ctx, std::span(centers).subspan(c0, count), in.data(), out.data());
    for (std::size_t i = 0; i < count; ++i) {
      std::copy(out.begin() + i * out_size, out.begin() + (i + 1) * out_size,
                est.begin() + centers[c0 + i] * out_size);
    }
  }

  const auto weights = reassembly_weights(w, cfg.delta);
  const std::size_t left = w.left();
  std::vector<Complex> next(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex acc{};
    double wsum = 0.0;
    // Slot k of the window centered at i - (k - left) covers point i.
    for (std::size_t k = 0; k < w.width; ++k) {
      const std::size_t m = (i + n + left - k) % n;
      if (m % cfg.stride != 0) continue;
      const float* e = est.data() + m * out_size + 2 * k;
      acc += weights[k] * Complex(e[0], e[1]);
      wsum += weights[k];
    }
    next[i] = cfg.stride == 1 ? acc : acc / wsum;
  }
  return next;
}

double RolloutResult::mean_mae() const {
  if (mae.empty()) throw std::logic_error("rollout has no metrics");
  double s = 0.0;
  for (double x : mae) s += x;
  return s / static_cast<double>(mae.size());
}

double RolloutResult::mean_correlation() const {
  if (correlation.empty()) throw std::logic_error("rollout has no metrics");
  double s = 0.0;
  for (double x : correlation) s += x;
  return s / static_cast<double>(correlation.size());
}

RolloutResult rollout(const WindowModel& model, const Trajectory& traj,
                      const RolloutConfig& cfg) {
  cfg.validate();
  const std::size_t h = model.window().history;
  if (cfg.seed_steps != h) {
    throw std::invalid_argument("rollout: seed_steps must equal the model history (" +
                                std::to_string(h) + ")");
  }
  if (traj.steps() < h) throw std::invalid_argument("rollout: trajectory shorter than the seed");
  const std::size_t n = traj.points();

  RolloutResult r;
  r.points = n;
  r.first_step = h;
  r.has_truth = traj.steps() >= h + cfg.n_steps;
  r.predicted.reserve(cfg.n_steps * n);

  std::deque<std::vector<Complex>> window;
  for (std::size_t j = 0; j < h; ++j) {
    const auto f = traj.frame(j);
    window.emplace_back(f.begin(), f.end());
  }
  const double seed_norm = probability(window.back(), traj.grid.dx());

  std::vector<std::span<const Complex>> frames(h);
  for (std::size_t s = 0; s < cfg.n_steps; ++s) {
    for (std::size_t j = 0; j < h; ++j) frames[j] = window[j];
    const StepContext ctx{&traj, h + s};
    std::vector<Complex> next = predict_step(model, frames, traj.v, cfg, ctx);
    bool finite = true;
    for (const Complex& z : next) finite = finite && std::isfinite(z.real()) && std::isfinite(z.imag());
    if (!finite) {
      r.truncated = true;
      r.diagnostic = "non-finite prediction at step " + std::to_string(h + s) +
                     "; rollout truncated after " + std::to_string(s) + " steps";
      break;
    }
    if (cfg.renormalize) {
      const double p = probability(next, traj.grid.dx());
      if (p > 0.0) {
        const double scale = std::sqrt(seed_norm / p);
        for (Complex& z : next) z *= scale;
      }
    }
    if (r.has_truth) {
      const auto truth = traj.frame(h + s);
      r.mae.push_back(qdemu::mae(next, truth));
      // An all-zero prediction has no direction; score it as uncorrelated.
      double np = 0.0;
      for (const Complex& z : next) np += std::norm(z);
      r.correlation.push_back(np > 0.0 ? normalized_correlation(next, truth) : 0.0);
    }
    r.predicted.insert(r.predicted.end(), next.begin(), next.end());
    window.pop_front();
    window.push_back(std::move(next));
  }
  return r;
}

void save_rollout(const std::filesystem::path& dir, const RolloutResult& r,
                  const Trajectory& source, const RolloutConfig& cfg) {
  std::filesystem::create_directories(dir);
  if (r.steps() > 0) {
    Trajectory t;
    t.grid = source.grid;
    t.grid.snapshots = r.steps();
    t.packet = source.packet;
    t.potential = source.potential;
    t.method = source.method;
    t.seed = source.seed;
    t.v = source.v;
    t.psi = r.predicted;
    save_trajectory(dir, t);
  }
  std::ostringstream csv;
  csv << "step,mae,correlation\n" << std::setprecision(10);
  for (std::size_t s = 0; s < r.mae.size(); ++s) {
    csv << r.first_step + s << ',' << r.mae[s] << ',' << r.correlation[s] << '\n';
  }
  io::write_text(dir / "metrics.csv", csv.str());
  nlohmann::json info{{"rollout", cfg},
                      {"first_step", r.first_step},
                      {"steps", r.steps()},
                      {"has_truth", r.has_truth},
                      {"truncated", r.truncated},
                      {"diagnostic", r.diagnostic}};
  if (!r.mae.empty()) {
    info["mean_mae"] = r.mean_mae();
    info["mean_correlation"] = r.mean_correlation();
  }
  io::write_json(dir / "rollout.json", info);
}

}  // namespace qdemu
