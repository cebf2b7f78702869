#include <algorithm>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "qdemu/analysis.hpp"
#include "qdemu/io.hpp"
#include "qdemu/rng.hpp"

namespace qdemu {

std::string to_string(HyperAxis a) {
  switch (a) {
    case HyperAxis::H: return "H";
    case HyperAxis::W: return "W";
    case HyperAxis::K: return "K";
  }
  return "?";
}

HyperAxis hyper_axis_from_string(const std::string& s) {
  if (s == "H") return HyperAxis::H;
  if (s == "W") return HyperAxis::W;
  if (s == "K") return HyperAxis::K;
  throw std::invalid_argument("unknown hyper-parameter axis '" + s + "' (H, W, K)");
}

std::vector<HyperPoint> hyperparameter_sweep(const HyperSweepConfig& cfg,
                                             const std::vector<Trajectory>& training,
                                             const TestSuite& suite,
                                             const std::vector<Trajectory>& truths) {
  if (cfg.values.empty()) throw std::invalid_argument("hyperparameter_sweep: no values");
  if (cfg.n_seeds == 0) throw std::invalid_argument("hyperparameter_sweep: n_seeds must be >= 1");
  std::vector<HyperPoint> out;
  for (std::size_t value : cfg.values) {
    HyperPoint p;
    p.value = value;
    for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
      try {
        WindowConfig w = cfg.window;
        ModelSpec spec = cfg.model;
        RolloutConfig r = cfg.rollout;
        switch (cfg.axis) {
          case HyperAxis::H: w.history = spec.history = r.seed_steps = value; break;
          case HyperAxis::W: w.width = spec.width = value; break;
          case HyperAxis::K: spec.hidden = value; break;
        }
        spec.width = w.width;
        spec.history = w.history;
        spec.channels = w.channels;
        w.seed = derive_seed(cfg.window.seed, s);
        TrainConfig t = cfg.train;
        t.seed = derive_seed(cfg.train.seed, s);
        const Dataset data = build_curriculum(training, w);
        const TrainResult tr = train(data, spec, t);
        const NeuralModel model(spec, tr.checkpoint.params, w.v_scale);
        const SuiteReport rep = run_suite(model, suite, truths, r, cfg.workers);
        if (rep.failures > 0) {
          throw std::runtime_error(std::to_string(rep.failures) + " suite cases failed");
        }
        p.seed_mae.push_back(rep.mean_mae);
        p.seed_corr.push_back(rep.mean_corr);
      } catch (const std::exception& e) {
        p.failures.push_back("seed " + std::to_string(s) + ": " + e.what());
      }
    }
    if (!p.seed_mae.empty()) {
      const double n = static_cast<double>(p.seed_mae.size());
      for (double x : p.seed_mae) p.mean_mae += x / n;
      for (double x : p.seed_corr) p.mean_corr += x / n;
      p.best_mae = *std::min_element(p.seed_mae.begin(), p.seed_mae.end());
      p.best_corr = *std::max_element(p.seed_corr.begin(), p.seed_corr.end());
    }
    out.push_back(std::move(p));
  }
  return out;
}

void write_hyper_csv(const std::filesystem::path& path, HyperAxis axis,
                     const std::vector<HyperPoint>& points) {
  std::ostringstream out;
  out << to_string(axis) << ",mean_mae,mean_corr,best_mae,best_corr,failures\n"
      << std::setprecision(10);
  for (const auto& p : points) {
    out << p.value << ',' << p.mean_mae << ',' << p.mean_corr << ',' << p.best_mae << ','
        << p.best_corr << ',' << p.failures.size() << '\n';
  }
  io::write_text(path, out.str());
}

}  // namespace qdemu
