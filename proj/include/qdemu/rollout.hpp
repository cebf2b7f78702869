#pragma once

// Full-field inference from window models: every grid point is covered by W
// windows (stride 1); their estimates are blended with Gaussian weights in the
// offset from each window's center. Rollouts feed predictions back as input.

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdemu/curriculum.hpp"
#include "qdemu/model.hpp"
#include "qdemu/sim.hpp"

namespace qdemu {

struct RolloutConfig {
  double delta = 4.0;         // Gaussian spread in grid points
  std::size_t n_steps = 400;
  std::size_t seed_steps = 4; // must equal the model history
  std::size_t stride = 1;     // window center spacing
  bool renormalize = false;   // rescale each predicted frame to the seed norm
  std::size_t batch = 256;    // windows per model call

  void validate() const;
};

void to_json(nlohmann::json& j, const RolloutConfig& c);
void from_json(const nlohmann::json& j, RolloutConfig& c);

// What a model may know about the step being predicted. Only the oracle looks
// at `truth`.
struct StepContext {
  const Trajectory* truth = nullptr;
  std::size_t target_step = 0;  // snapshot index of the predicted frame
};

class WindowModel {
 public:
  virtual ~WindowModel() = default;
  virtual const WindowConfig& window() const = 0;
  // inputs [count][H*W*C] -> outputs [count][2W]; centers[i] is the window
  // center of row i.
  virtual void predict(const StepContext& ctx, std::span<const std::size_t> centers,
                       const float* inputs, float* outputs) const = 0;
};

// Returns the true next-step window; used to check the reassembly.
class OracleModel : public WindowModel {
 public:
  explicit OracleModel(WindowConfig cfg) : cfg_(cfg) {}
  const WindowConfig& window() const override { return cfg_; }
  void predict(const StepContext& ctx, std::span<const std::size_t> centers,
               const float* inputs, float* outputs) const override;

 private:
  WindowConfig cfg_;
};

class NeuralModel : public WindowModel {
 public:
  NeuralModel(ModelSpec spec, ParameterSet params, double v_scale = 15.0);
  const WindowConfig& window() const override { return cfg_; }
  void predict(const StepContext& ctx, std::span<const std::size_t> centers,
               const float* inputs, float* outputs) const override;
  const ModelSpec& spec() const { return spec_; }
  const ParameterSet& params() const { return params_; }

 private:
  ModelSpec spec_;
  ParameterSet params_;
  WindowConfig cfg_;
};

// Normalized weights for offsets -left..right (index offset + left).
std::vector<double> reassembly_weights(const WindowConfig& w, double delta);

// frames: the last H frames, oldest first. v is the raw potential.
std::vector<Complex> predict_step(const WindowModel& model,
                                  std::span<const std::span<const Complex>> frames,
                                  std::span<const double> v,
                                  const RolloutConfig& cfg,
                                  const StepContext& ctx = {});

struct RolloutResult {
  std::size_t points = 0;
  std::size_t first_step = 0;     // snapshot index of predicted[0]
  std::vector<Complex> predicted; // [steps][points]
  std::vector<double> mae;        // per step, when truth is available
  std::vector<double> correlation;
  bool has_truth = false;
  bool truncated = false;
  std::string diagnostic;

  std::size_t steps() const { return points ? predicted.size() / points : 0; }
  std::span<const Complex> frame(std::size_t j) const {
    return {predicted.data() + j * points, points};
  }
  double mean_mae() const;
  double mean_correlation() const;
};

// Seeds with the first H snapshots of `traj` and predicts n_steps more.
// Metrics are computed when traj holds H + n_steps snapshots.
RolloutResult rollout(const WindowModel& model, const Trajectory& traj,
                      const RolloutConfig& cfg);

// Trajectory store layout for the prediction plus metrics.csv
// (step,mae,correlation).
void save_rollout(const std::filesystem::path& dir, const RolloutResult& r,
                  const Trajectory& source, const RolloutConfig& cfg);

}  // namespace qdemu
