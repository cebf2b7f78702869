#include "qdemu/training.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qdemu/json_util.hpp"
#include "qdemu/io.hpp"
#include "qdemu/rng.hpp"

namespace qdemu {

using ad::Tensor;
using ad::Var;
using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw std::invalid_argument("warmup_fraction must be in [0, 1)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must be in [0, 1)");
  }
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},         {"batch_size", c.batch_size},
           {"lr_peak", c.lr_peak},       {"lr_final", c.lr_final},
           {"warmup_fraction", c.warmup_fraction},
           {"beta1", c.beta1},           {"beta2", c.beta2},
           {"epsilon", c.epsilon},       {"weight_decay", c.weight_decay},
           {"clip_norm", c.clip_norm},   {"seed", c.seed},
           {"log_every", c.log_every}};
}

void from_json(const json& j, TrainConfig& c) {
  require_known_keys(j, {"epochs", "batch_size", "lr_peak", "lr_final", "warmup_fraction",
                         "beta1", "beta2", "epsilon", "weight_decay", "clip_norm", "seed",
                         "log_every"},
                     "train");
  read_optional(j, "epochs", c.epochs);
  read_optional(j, "batch_size", c.batch_size);
  read_optional(j, "lr_peak", c.lr_peak);
  read_optional(j, "lr_final", c.lr_final);
  read_optional(j, "warmup_fraction", c.warmup_fraction);
  read_optional(j, "beta1", c.beta1);
  read_optional(j, "beta2", c.beta2);
  read_optional(j, "epsilon", c.epsilon);
  read_optional(j, "weight_decay", c.weight_decay);
  read_optional(j, "clip_norm", c.clip_norm);
  read_optional(j, "seed", c.seed);
  read_optional(j, "log_every", c.log_every);
}

Var mse_loss(Var pred, Var target, std::size_t width) {
  const Tensor& p = pred.value();
  if (p.shape() != target.value().shape()) {
    throw std::invalid_argument("mse_loss: prediction and target shapes differ");
  }
  if (p.cols() != 2 * width) throw std::invalid_argument("mse_loss: expected [B, 2W] tensors");
  const double scale = 1.0 / (static_cast<double>(p.rows()) * static_cast<double>(width));
  return ad::sum_square(ad::sub(pred, target), static_cast<float>(scale));
}

double lr_at(std::uint64_t step, std::uint64_t total, const TrainConfig& cfg) {
  if (total == 0) throw std::invalid_argument("lr_at: total_steps must be > 0");
  if (step > total) throw std::invalid_argument("lr_at: step beyond total_steps");
  const double s = static_cast<double>(step);
  const double warm = cfg.warmup_fraction * static_cast<double>(total);
  if (s < warm) return cfg.lr_peak * s / warm;
  const double rest = static_cast<double>(total) - warm;
  if (rest <= 0.0) return cfg.lr_final;
  return cfg.lr_peak + (cfg.lr_final - cfg.lr_peak) * (s - warm) / rest;
}

AdamState init_adam(const ParameterSet& params) {
  AdamState s;
  for (const auto& t : params.tensors) {
    s.m.emplace_back(t.shape(), 0.0f);
    s.v.emplace_back(t.shape(), 0.0f);
  }
  return s;
}

double clip_global_norm(std::vector<Tensor>& grads, double clip_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (float x : g.values()) sq += static_cast<double>(x) * x;
  }
  const double norm = std::sqrt(sq);
  if (std::isfinite(norm) && norm > clip_norm) {
    const double scale = clip_norm / norm;
    for (auto& g : grads) {
      float* d = g.mutable_data();
      for (std::size_t i = 0; i < g.size(); ++i) d[i] = static_cast<float>(d[i] * scale);
    }
  }
  return norm;
}

void adamw_step(ParameterSet& params, const std::vector<Tensor>& grads, AdamState& state,
                const TrainConfig& cfg, double lr) {
  if (grads.size() != params.tensors.size() || state.m.size() != params.tensors.size()) {
    throw std::invalid_argument("adamw_step: parameter, gradient and state counts differ");
  }
  for (std::size_t p = 0; p < grads.size(); ++p) {
    for (float g : grads[p].values()) {
      if (!std::isfinite(g)) {
        throw NumericalError("non-finite gradient in '" + params.names[p] + "' at update " +
                             std::to_string(state.step + 1));
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - lr * cfg.weight_decay;
  for (std::size_t p = 0; p < grads.size(); ++p) {
    float* w = params.tensors[p].mutable_data();
    float* m = state.m[p].mutable_data();
    float* v = state.v[p].mutable_data();
    const float* g = grads[p].data();
    for (std::size_t i = 0; i < grads[p].size(); ++i) {
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * static_cast<double>(g[i]) * g[i];
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = (mi / c1) / (std::sqrt(vi / c2) + cfg.epsilon);
      w[i] = static_cast<float>(w[i] * decay - lr * update);
    }
  }
}

std::string config_hash(const ModelSpec& spec, const TrainConfig& cfg) {
  return io::hex64(io::fnv1a(json{{"model", spec}, {"train", cfg}}.dump()));
}

namespace {

void fill_batch(const Dataset& data, const std::vector<std::size_t>& order, std::size_t begin,
                std::size_t count, std::vector<float>& x, std::vector<float>& y) {
  const std::size_t in = data.config.input_size(), out = data.config.target_size();
  x.resize(count * in);
  y.resize(count * out);
  for (std::size_t b = 0; b < count; ++b) {
    const std::size_t k = order[begin + b];
    data.copy_input(k, x.data() + b * in);
    data.copy_target(k, y.data() + b * out);
  }
}

void check_compatible(const Dataset& data, const ModelSpec& spec) {
  spec.validate();
  const WindowConfig& w = data.config;
  if (w.width != spec.width || w.history != spec.history || w.channels != spec.channels) {
    throw std::invalid_argument("dataset windows (W=" + std::to_string(w.width) +
                                ", H=" + std::to_string(w.history) +
                                ", C=" + std::to_string(w.channels) +
                                ") do not match the model spec");
  }
}

}  // namespace

TrainResult train(const Dataset& data, const ModelSpec& spec, const TrainConfig& cfg,
                  const ProgressFn& progress) {
  cfg.validate();
  check_compatible(data, spec);
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck.spec = spec;
  ck.params = build_model(spec, derive_seed(cfg.seed, 0));
  ck.optimizer = init_adam(ck.params);
  ck.config_hash = config_hash(spec, cfg);
  ck.train_config = cfg;

  const std::size_t n = data.size();
  const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::uint64_t total = cfg.epochs * per_epoch;
  std::vector<std::size_t> order(n);
  std::vector<float> x, y;
  double window_sum = 0.0;
  std::size_t window_count = 0;
  bool first_window = true;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, epoch + 1));
    shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - begin);
      fill_batch(data, order, begin, count, x, y);
      ad::Tape tape;
      const Var xv = tape.constant(Tensor({count, spec.input_size()}, x));
      const Var yv = tape.constant(Tensor({count, spec.output_size()}, y));
      const ForwardPass f = forward(tape, spec, ck.params, xv, true);
      const Var loss = mse_loss(f.output, yv, spec.width);
      const double loss_value = loss.value()[0];
      if (!std::isfinite(loss_value)) {
        throw TrainingDiverged("loss became non-finite at update " + std::to_string(ck.step + 1) +
                                   " (epoch " + std::to_string(epoch) + ")",
                               ck);
      }
      tape.backward(loss);
      std::vector<Tensor> grads;
      grads.reserve(f.params.size());
      for (Var p : f.params) grads.push_back(p.grad());
      const double norm = clip_global_norm(grads, cfg.clip_norm);
      const double lr = lr_at(ck.step + 1, total, cfg);
      try {
        adamw_step(ck.params, grads, ck.optimizer, cfg, lr);
      } catch (const NumericalError& e) {
        throw TrainingDiverged(e.what(), ck);
      }
      ++ck.step;
      epoch_sum += loss_value * static_cast<double>(count);
      window_sum += loss_value;
      ++window_count;
      const bool last = ck.step == total;
      if ((cfg.log_every && ck.step % cfg.log_every == 0) || last) {
        const LossPoint pt{ck.step, epoch, window_sum / window_count, lr, norm};
        if (first_window) {
          result.initial_loss = pt.loss;
          first_window = false;
        }
        result.curve.push_back(pt);
        if (progress) progress(pt);
        window_sum = 0.0;
        window_count = 0;
      }
    }
    result.final_loss = epoch_sum / static_cast<double>(n);
  }
  return result;
}

double evaluate_loss(const Dataset& data, const ModelSpec& spec, const ParameterSet& params,
                     std::size_t batch_size) {
  check_compatible(data, spec);
  const std::size_t in = spec.input_size(), out = spec.output_size();
  std::vector<float> pred, x, t;
  double sum = 0.0;
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - begin);
    pred.resize(count * out);
    x.resize(count * in);
    t.resize(count * out);
    for (std::size_t b = 0; b < count; ++b) {
      data.copy_input(begin + b, x.data() + b * in);
      data.copy_target(begin + b, t.data() + b * out);
    }
    predict(spec, params, x.data(), count, pred.data());
    for (std::size_t i = 0; i < count * out; ++i) {
      const double d = static_cast<double>(pred[i]) - t[i];
      sum += d * d;
    }
  }
  return sum / (static_cast<double>(data.size()) * static_cast<double>(spec.width));
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  std::filesystem::create_directories(dir);
  std::vector<float> blob, opt;
  json entries = json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < ck.params.tensors.size(); ++i) {
    const Tensor& t = ck.params.tensors[i];
    entries.push_back({{"name", ck.params.names[i]},
                       {"shape", t.shape()},
                       {"offset", offset},
                       {"count", t.size()}});
    blob.insert(blob.end(), t.values().begin(), t.values().end());
    offset += t.size();
  }
  const bool has_opt = ck.optimizer.m.size() == ck.params.tensors.size();
  if (has_opt) {
    for (const auto& t : ck.optimizer.m) opt.insert(opt.end(), t.values().begin(), t.values().end());
    for (const auto& t : ck.optimizer.v) opt.insert(opt.end(), t.values().begin(), t.values().end());
    io::write_f32(dir / "optimizer.bin", opt);
  }
  io::write_f32(dir / "params.bin", blob);
  const json m{{"format_version", kCheckpointFormatVersion},
               {"kind", "checkpoint"},
               {"model", ck.spec},
               {"parameter_count", ck.params.count()},
               {"dtype", "float32-le"},
               {"parameters", entries},
               {"step", ck.step},
               {"config_hash", ck.config_hash},
               {"train_config", ck.train_config},
               {"optimizer", has_opt ? json{{"kind", "adamw"},
                                           {"step", ck.optimizer.step},
                                           {"file", "optimizer.bin"},
                                           {"layout", "m then v, parameter order"}}
                                     : json(nullptr)}};
  io::write_json(dir / "params.json", m);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "params.json")) {
    throw io::MissingInput(dir / "params.json", "train");
  }
  const json m = io::read_json(dir / "params.json");
  if (m.value("format_version", 0) != kCheckpointFormatVersion || m.value("kind", "") != "checkpoint") {
    throw std::runtime_error(dir.string() + ": not a checkpoint of a supported version");
  }
  Checkpoint ck;
  ck.spec = m.at("model").get<ModelSpec>();
  ck.step = m.at("step").get<std::uint64_t>();
  ck.config_hash = m.at("config_hash").get<std::string>();
  ck.train_config = m.at("train_config");
  const auto blob = io::read_f32(dir / "params.bin");
  std::size_t total = 0;
  for (const auto& e : m.at("parameters")) {
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    const auto offset = e.at("offset").get<std::size_t>();
    const auto count = ad::shape_size(shape);
    if (offset + count > blob.size()) throw std::runtime_error(dir.string() + ": params.bin too short");
    ck.params.names.push_back(e.at("name").get<std::string>());
    ck.params.tensors.emplace_back(
        shape, std::vector<float>(blob.begin() + offset, blob.begin() + offset + count));
    total += count;
  }
  if (total != blob.size()) throw std::runtime_error(dir.string() + ": params.bin size mismatch");
  if (!m.at("optimizer").is_null()) {
    const auto opt = io::read_f32(dir / "optimizer.bin");
    if (opt.size() != 2 * total) throw std::runtime_error(dir.string() + ": optimizer.bin size mismatch");
    std::size_t off = 0;
    for (int which = 0; which < 2; ++which) {
      for (const auto& t : ck.params.tensors) {
        Tensor s(t.shape(), std::vector<float>(opt.begin() + off, opt.begin() + off + t.size()));
        (which == 0 ? ck.optimizer.m : ck.optimizer.v).push_back(std::move(s));
        off += t.size();
      }
    }
    ck.optimizer.step = m.at("optimizer").at("step").get<std::uint64_t>();
  }
  // Validates names and shapes against the spec.
  if (ck.params.names.size() != build_model(ck.spec, 0).names.size()) {
    throw std::runtime_error(dir.string() + ": parameters do not match the model spec");
  }
  return ck;
}

}  // namespace qdemu
