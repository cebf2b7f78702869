#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "qdemu/analysis.hpp"
#include "qdemu/io.hpp"
#include "qdemu/parallel.hpp"

namespace qdemu {
namespace {

// A truncated rollout scores the missing steps as a zero prediction:
// correlation 0, error mean |psi|.
CaseMetrics score(const SimCase& c, const Trajectory& truth, const RolloutResult& r,
                  std::size_t n_steps) {
  CaseMetrics m;
  m.name = c.name;
  m.category = c.category;
  m.steps = r.steps();
  m.truncated = r.truncated;
  m.mae = r.mae;
  m.correlation = r.correlation;
  for (std::size_t s = r.mae.size(); s < n_steps; ++s) {
    const auto f = truth.frame(r.first_step + s);
    double a = 0.0;
    for (const Complex& z : f) a += std::abs(z);
    m.mae.push_back(a / static_cast<double>(f.size()));
    m.correlation.push_back(0.0);
  }
  for (double x : m.mae) m.mean_mae += x;
  for (double x : m.correlation) m.mean_corr += x;
  m.mean_mae /= static_cast<double>(m.mae.size());
  m.mean_corr /= static_cast<double>(m.correlation.size());
  return m;
}

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(10) << x;
  return s.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

}  // namespace

std::vector<Trajectory> simulate_suite(const TestSuite& suite, const SimGrid& grid,
                                       PropagationMethod method, std::size_t workers) {
  std::vector<Trajectory> out(suite.cases.size());
  parallel_for(out.size(), workers, [&](std::size_t i) {
    const auto& c = suite.cases[i];
    out[i] = run_simulation(c.packet, c.potential, grid, method);
  });
  return out;
}

SuiteReport run_suite(const WindowModel& model, const TestSuite& suite,
                      const std::vector<Trajectory>& truths, const RolloutConfig& cfg,
                      std::size_t workers) {
  if (truths.size() != suite.cases.size()) {
    throw std::invalid_argument("run_suite: one trajectory per case expected");
  }
  SuiteReport rep;
  rep.suite = suite.name;
  rep.cases.resize(suite.cases.size());
  parallel_for(suite.cases.size(), workers, [&](std::size_t i) {
    const auto& c = suite.cases[i];
    try {
      const RolloutResult r = rollout(model, truths[i], cfg);
      if (!r.has_truth) throw std::invalid_argument("ground truth shorter than the rollout");
      rep.cases[i] = score(c, truths[i], r, cfg.n_steps);
    } catch (const std::exception& e) {
      rep.cases[i].name = c.name;
      rep.cases[i].category = c.category;
      rep.cases[i].error = e.what();
    }
  });
  std::size_t ok = 0;
  for (const auto& m : rep.cases) {
    if (!m.ok()) {
      ++rep.failures;
      continue;
    }
    ++ok;
    rep.mean_mae += m.mean_mae;
    rep.mean_corr += m.mean_corr;
  }
  if (ok > 0) {
    rep.mean_mae /= static_cast<double>(ok);
    rep.mean_corr /= static_cast<double>(ok);
  } else {
    rep.mean_mae = rep.mean_corr = std::nan("");
  }
  return rep;
}

SuiteReport run_suite(const WindowModel& model, const TestSuite& suite, const SimGrid& grid,
                      const RolloutConfig& cfg, std::size_t workers) {
  return run_suite(model, suite, simulate_suite(suite, grid, PropagationMethod::spectral, workers),
                   cfg, workers);
}

void write_suite_csv(const std::filesystem::path& path, const SuiteReport& r) {
  std::ostringstream out;
  out << "case,category,mean_mae,mean_corr,steps,truncated,error\n";
  for (const auto& m : r.cases) {
    out << csv_field(m.name) << ',' << m.category << ',' << fmt(m.mean_mae) << ','
        << fmt(m.mean_corr) << ',' << m.steps << ',' << (m.truncated ? 1 : 0) << ','
        << csv_field(m.error) << '\n';
  }
  out << "ALL," << r.suite << ',' << fmt(r.mean_mae) << ',' << fmt(r.mean_corr) << ",,,"
      << (r.failures ? std::to_string(r.failures) + " failed" : "") << '\n';
  io::write_text(path, out.str());
}

void write_suite_steps_csv(const std::filesystem::path& path, const SuiteReport& r) {
  std::ostringstream out;
  out << "case,step,mae,correlation\n";
  for (const auto& m : r.cases) {
    for (std::size_t s = 0; s < m.mae.size(); ++s) {
      out << csv_field(m.name) << ',' << s << ',' << fmt(m.mae[s]) << ','
          << fmt(m.correlation[s]) << '\n';
    }
  }
  io::write_text(path, out.str());
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::S0: return "S0";
    case SweepAxis::E0: return "E0";
    case SweepAxis::W_b: return "W_b";
    case SweepAxis::H_b: return "H_b";
  }
  return "?";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "S0") return SweepAxis::S0;
  if (s == "E0") return SweepAxis::E0;
  if (s == "W_b") return SweepAxis::W_b;
  if (s == "H_b") return SweepAxis::H_b;
  throw std::invalid_argument("unknown sweep axis '" + s + "' (S0, E0, W_b, H_b)");
}

SimCase default_sweep_case() {
  return SimCase{"sweep", "rect", {30.0, 2.0, 5.0}, RectangularBarrier{7.0, 7.0, {}}};
}

SimCase sweep_case(const SimCase& base, SweepAxis axis, double value) {
  SimCase c = base;
  c.name = to_string(axis) + "=" + fmt(value);
  switch (axis) {
    case SweepAxis::S0: c.packet.spread = value; break;
    case SweepAxis::E0: c.packet.energy = value; break;
    case SweepAxis::W_b:
    case SweepAxis::H_b: {
      auto* b = std::get_if<RectangularBarrier>(&c.potential);
      if (b == nullptr) throw std::invalid_argument("barrier sweeps need a rectangular base case");
      (axis == SweepAxis::W_b ? b->width : b->height) = value;
      break;
    }
  }
  return c;
}

std::vector<double> default_sweep_values(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::S0: return {0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 5, 6};
    case SweepAxis::E0: return {0.5, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
    case SweepAxis::W_b: return {0.25, 0.5, 1, 2, 3, 5, 7, 10, 14, 20};
    case SweepAxis::H_b: return {0, 1, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
  }
  return {};
}

std::vector<SweepPoint> generalization_sweep(const std::vector<const WindowModel*>& models,
                                             SweepAxis axis, const std::vector<double>& values,
                                             const SimCase& base, const SimGrid& grid,
                                             const RolloutConfig& cfg, std::size_t workers) {
  if (models.empty()) throw std::invalid_argument("generalization_sweep: no models");
  for (const auto* m : models) {
    if (m == nullptr) throw std::invalid_argument("generalization_sweep: missing model");
  }
  TestSuite suite{"sweep_" + to_string(axis), {}};
  for (double v : values) suite.cases.push_back(sweep_case(base, axis, v));
  const auto truths = simulate_suite(suite, grid, PropagationMethod::spectral, workers);

  const std::size_t nm = models.size();
  std::vector<double> corr(values.size() * nm);
  parallel_for(corr.size(), workers, [&](std::size_t k) {
    const std::size_t i = k / nm, s = k % nm;
    const RolloutResult r = rollout(*models[s], truths[i], cfg);
    if (!r.has_truth) throw std::invalid_argument("sweep grid shorter than the rollout");
    corr[k] = score(suite.cases[i], truths[i], r, cfg.n_steps).mean_corr;
  });
  std::vector<SweepPoint> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepPoint& p = out[i];
    p.value = values[i];
    p.per_model.assign(corr.begin() + i * nm, corr.begin() + (i + 1) * nm);
    p.min = *std::min_element(p.per_model.begin(), p.per_model.end());
    p.max = *std::max_element(p.per_model.begin(), p.per_model.end());
    for (double c : p.per_model) p.mean += c;
    p.mean /= static_cast<double>(nm);
  }
  return out;
}

void write_sweep_csv(const std::filesystem::path& path, SweepAxis axis,
                     const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << to_string(axis) << ",mean_corr,min_corr,max_corr";
  const std::size_t nm = points.empty() ? 0 : points[0].per_model.size();
  for (std::size_t s = 0; s < nm; ++s) out << ",seed" << s;
  out << '\n';
  for (const auto& p : points) {
    out << fmt(p.value) << ',' << fmt(p.mean) << ',' << fmt(p.min) << ',' << fmt(p.max);
    for (double c : p.per_model) out << ',' << fmt(c);
    out << '\n';
  }
  io::write_text(path, out.str());
}

}  // namespace qdemu
