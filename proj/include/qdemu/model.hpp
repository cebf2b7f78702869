#pragma once

// The four next-step emulators. Every model maps a batch of windows
// [B, H*W*C] (layout as in curriculum.hpp) to [B, W*2].
//
//   linear: last time step [W*C] -> dense(2W)
//   dense:  per step dense(K, relu) -> flatten [H*K] -> dense(K, relu) -> dense(2W)
//   conv:   per spatial point a kernel over (H, C) -> F filters, relu
//           -> flatten [W*F] -> dense(K, relu) -> dense(2W)
//   gru:    per step dense(K, relu) -> GRU(K), final state -> dense(2W)

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdemu/autodiff.hpp"

namespace qdemu {

enum class ModelKind { linear, dense, conv, gru };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct ModelSpec {
  ModelKind kind = ModelKind::gru;
  std::size_t hidden = 0;   // K; 0 means W * C
  std::size_t width = 23;   // W
  std::size_t history = 4;  // H
  std::size_t channels = 3; // C
  std::size_t filters = 0;  // F; 0 means floor(K / 4)
  bool gru_reset_after = false;

  void validate() const;
  std::size_t units() const { return hidden ? hidden : width * channels; }
  std::size_t conv_filters() const { return filters ? filters : units() / 4; }
  std::size_t input_size() const { return history * width * channels; }
  std::size_t output_size() const { return 2 * width; }
};

void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);

struct ParameterSet {
  std::vector<std::string> names;
  std::vector<ad::Tensor> tensors;

  std::size_t count() const;  // total scalar parameters
  const ad::Tensor& at(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
};

// Weight matrices uniform in +-sqrt(3 / fan_in), biases zero.
ParameterSet build_model(const ModelSpec& spec, std::uint64_t seed);
std::size_t parameter_count(const ModelSpec& spec);

struct ForwardPass {
  ad::Var output;               // [B, 2W]
  std::vector<ad::Var> params;  // same order as ParameterSet
};

// Records the model on `tape`. Parameters become leaves when
// `track_params`, constants otherwise.
ForwardPass forward(ad::Tape& tape, const ModelSpec& spec,
                    const ParameterSet& params, ad::Var input,
                    bool track_params);

// Gradient-free batch inference; outputs [batch][2W].
void predict(const ModelSpec& spec, const ParameterSet& params,
             const float* inputs, std::size_t batch, float* outputs);

}  // namespace qdemu
