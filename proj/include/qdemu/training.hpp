#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdemu/curriculum.hpp"
#include "qdemu/error.hpp"
#include "qdemu/model.hpp"

namespace qdemu {

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 128;
  double lr_peak = 1e-3;
  double lr_final = 1e-6;
  double warmup_fraction = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-7;
  double weight_decay = 1.0;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  std::size_t log_every = 100;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// (1 / (B W)) sum |pred - target|^2 over a [B, 2W] batch, Re and Im being the
// two components of each squared modulus.
ad::Var mse_loss(ad::Var pred, ad::Var target, std::size_t width);

// Linear 0 -> lr_peak over warmup_fraction * total steps, then linear to
// lr_final at `total`. Throws when total == 0.
double lr_at(std::uint64_t step, std::uint64_t total, const TrainConfig& cfg);

struct AdamState {
  std::vector<ad::Tensor> m;
  std::vector<ad::Tensor> v;
  std::uint64_t step = 0;  // updates applied
};

AdamState init_adam(const ParameterSet& params);

// Scales grads in place so their global L2 norm is at most clip_norm.
// Returns the norm before clipping.
double clip_global_norm(std::vector<ad::Tensor>& grads, double clip_norm);

// theta <- theta - lr * lambda * theta, then the bias-corrected Adam update
// with rate lr. Throws NumericalError on non-finite gradients.
void adamw_step(ParameterSet& params, const std::vector<ad::Tensor>& grads,
                AdamState& state, const TrainConfig& cfg, double lr);

struct Checkpoint {
  ModelSpec spec;
  ParameterSet params;
  AdamState optimizer;
  std::uint64_t step = 0;
  std::string config_hash;
  nlohmann::json train_config;
};

struct LossPoint {
  std::uint64_t step;
  std::size_t epoch;
  double loss;
  double lr;
  double grad_norm;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossPoint> curve;  // every log_every steps and the last step
  double initial_loss = 0.0;     // mean loss over the first logged window
  double final_loss = 0.0;       // mean loss over the last epoch
};

// Raised when the loss or gradients go non-finite; carries the parameters
// from before the failing step.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, Checkpoint last_good)
      : NumericalError(what), last_good(std::move(last_good)) {}
  Checkpoint last_good;
};

using ProgressFn = std::function<void(const LossPoint&)>;

std::string config_hash(const ModelSpec& spec, const TrainConfig& cfg);

// Seeded shuffle per epoch, then clip -> AdamW -> schedule each step.
TrainResult train(const Dataset& data, const ModelSpec& spec,
                  const TrainConfig& cfg, const ProgressFn& progress = {});

// Full-dataset mean of the loss, evaluated in batches.
double evaluate_loss(const Dataset& data, const ModelSpec& spec,
                     const ParameterSet& params, std::size_t batch_size = 512);

// <dir>/params.json + params.bin (float32-le, manifest order) +
// optimizer.bin (Adam m then v, same order).
inline constexpr int kCheckpointFormatVersion = 1;
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace qdemu
