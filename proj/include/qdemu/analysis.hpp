#pragma once

// Benchmark suites, sweeps and gradient attribution on trained emulators.
// Every table is written as CSV with a header row.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qdemu/curriculum.hpp"
#include "qdemu/metrics.hpp"
#include "qdemu/model.hpp"
#include "qdemu/rollout.hpp"
#include "qdemu/training.hpp"

namespace qdemu {

// ---- suites -------------------------------------------------------------

struct TestSuite {
  std::string name;
  std::vector<SimCase> cases;

  // Cases whose category is one of `categories`.
  TestSuite select(const std::vector<std::string>& categories) const;
};

// 12 Gaussian packets off the training grid, no potential.
TestSuite free_suite();
// 25 cases: 11 rect, 2 multi_rect (double), 1 multi_rect (triple),
// 7 irregular (incl. pyramid and half_circle), 2 quadratic, 2 well.
// Irregular shapes are sampled on `grid`.
TestSuite potential_suite(const SimGrid& grid);
// free + potential, 37 cases.
TestSuite standard_suite(const SimGrid& grid);
// free | potential | standard | rect | figure (pyramid and half-circle)
TestSuite suite_by_name(const std::string& name, const SimGrid& grid);

void to_json(nlohmann::json& j, const SimCase& c);
void from_json(const nlohmann::json& j, SimCase& c);

// ---- suite evaluation ---------------------------------------------------

struct CaseMetrics {
  std::string name;
  std::string category;
  double mean_mae = 0.0;
  double mean_corr = 0.0;
  std::size_t steps = 0;
  bool truncated = false;
  std::string error;  // nonempty when the case failed
  std::vector<double> mae;
  std::vector<double> correlation;

  bool ok() const { return error.empty(); }
};

struct SuiteReport {
  std::string suite;
  std::vector<CaseMetrics> cases;
  double mean_mae = 0.0;   // over steps, then over successful cases
  double mean_corr = 0.0;
  std::size_t failures = 0;
};

std::vector<Trajectory> simulate_suite(const TestSuite& suite, const SimGrid& grid,
                                       PropagationMethod method = PropagationMethod::spectral,
                                       std::size_t workers = 0);

// `truths` in suite order. Failures are recorded per case, never thrown.
SuiteReport run_suite(const WindowModel& model, const TestSuite& suite,
                      const std::vector<Trajectory>& truths, const RolloutConfig& cfg,
                      std::size_t workers = 0);
SuiteReport run_suite(const WindowModel& model, const TestSuite& suite, const SimGrid& grid,
                      const RolloutConfig& cfg, std::size_t workers = 0);

// case,category,mean_mae,mean_corr,steps,truncated,error plus an "ALL" row.
void write_suite_csv(const std::filesystem::path& path, const SuiteReport& r);
// case,step,mae,correlation
void write_suite_steps_csv(const std::filesystem::path& path, const SuiteReport& r);

// ---- generalization sweep -----------------------------------------------

enum class SweepAxis { S0, E0, W_b, H_b };
std::string to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);

// Rectangular barrier case the sweeps perturb.
SimCase default_sweep_case();
// Packet centered in a box-sized free region for S0/E0; barrier for W_b/H_b.
SimCase sweep_case(const SimCase& base, SweepAxis axis, double value);
std::vector<double> default_sweep_values(SweepAxis axis);

struct SweepPoint {
  double value = 0.0;
  double mean = 0.0;  // of the per-model <C>
  double min = 0.0;
  double max = 0.0;
  std::vector<double> per_model;
};

// One model per training seed.
std::vector<SweepPoint> generalization_sweep(const std::vector<const WindowModel*>& models,
                                             SweepAxis axis, const std::vector<double>& values,
                                             const SimCase& base, const SimGrid& grid,
                                             const RolloutConfig& cfg, std::size_t workers = 0);
// value,mean_corr,min_corr,max_corr,seed0,...
void write_sweep_csv(const std::filesystem::path& path, SweepAxis axis,
                     const std::vector<SweepPoint>& points);

// ---- attribution ----------------------------------------------------------

// Gradients of the center output pixel, laid out like the model input.
struct AttributionMap {
  std::size_t history = 0, width = 0, channels = 0;
  std::vector<double> d_re;  // d Re(psi_target) / d input
  std::vector<double> d_im;  // d Im(psi_target) / d input
  WindowOrigin origin;

  std::size_t index(std::size_t h, std::size_t w, std::size_t c) const {
    return (h * width + w) * channels + c;
  }
};

std::vector<AttributionMap> direct_gradients(const ModelSpec& spec, const ParameterSet& params,
                                             const float* inputs, std::size_t count);
AttributionMap direct_gradients(const ModelSpec& spec, const ParameterSet& params,
                                const WindowSample& sample);

struct AttributionStats {
  AttributionMap mean;
  AttributionMap std;  // population standard deviation
  std::vector<std::size_t> samples;  // dataset indices used
  // Fraction of sampled windows where the two newest steps carry more
  // wave-channel attribution than the two oldest.
  double recency_fraction = 0.0;
};

// n windows drawn without replacement; `keep` restricts the candidates.
AttributionStats averaged_gradients(const ModelSpec& spec, const ParameterSet& params,
                                    const Dataset& data, std::size_t n, std::uint64_t seed,
                                    const std::function<bool(std::size_t)>& keep = {});

// Windows whose potential channel is zero everywhere.
bool free_region_window(const Dataset& data, std::size_t k);
// Mean |gradient| over the wave channels of the newest two steps exceeds
// that of the oldest two.
bool recency_holds(const AttributionMap& m);

struct CauchyRiemannReport {
  // ||dRe/dRe_in - dIm/dIm_in|| / rms(||dRe/dRe_in||, ||dIm/dIm_in||)
  double re_re_minus_im_im = 0.0;
  // ||dRe/dIm_in + dIm/dRe_in|| / rms(||dRe/dIm_in||, ||dIm/dRe_in||)
  double re_im_plus_im_re = 0.0;
};
CauchyRiemannReport cauchy_riemann_check(const AttributionMap& mean);

// h,w,c,mean_d_re,mean_d_im,std_d_re,std_d_im
void write_attribution_csv(const std::filesystem::path& path, const AttributionStats& s);

// ---- hyper-parameter sweep ------------------------------------------------

enum class HyperAxis { H, W, K };
std::string to_string(HyperAxis a);
HyperAxis hyper_axis_from_string(const std::string& s);

struct HyperSweepConfig {
  HyperAxis axis = HyperAxis::H;
  std::vector<std::size_t> values;
  std::size_t n_seeds = 5;
  WindowConfig window;
  ModelSpec model;
  TrainConfig train;
  RolloutConfig rollout;
  std::size_t workers = 0;
};

struct HyperPoint {
  std::size_t value = 0;
  double mean_mae = 0.0, mean_corr = 0.0;  // over successful seeds
  double best_mae = 0.0, best_corr = 0.0;
  std::vector<double> seed_mae, seed_corr;
  std::vector<std::string> failures;
};

// Trains n_seeds models per value on `training` and scores each on the suite.
std::vector<HyperPoint> hyperparameter_sweep(const HyperSweepConfig& cfg,
                                             const std::vector<Trajectory>& training,
                                             const TestSuite& suite,
                                             const std::vector<Trajectory>& truths);
// value,mean_mae,mean_corr,best_mae,best_corr,failures
void write_hyper_csv(const std::filesystem::path& path, HyperAxis axis,
                     const std::vector<HyperPoint>& points);

}  // namespace qdemu
