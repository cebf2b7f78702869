#include "qdemu/model.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "qdemu/json_util.hpp"
#include "qdemu/rng.hpp"

namespace qdemu {

using ad::Tensor;
using ad::Var;
using nlohmann::json;

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::linear: return "linear";
    case ModelKind::dense: return "dense";
    case ModelKind::conv: return "conv";
    case ModelKind::gru: return "gru";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "linear") return ModelKind::linear;
  if (s == "dense") return ModelKind::dense;
  if (s == "conv") return ModelKind::conv;
  if (s == "gru") return ModelKind::gru;
  throw std::invalid_argument("unknown model kind '" + s + "' (linear, dense, conv, gru)");
}

void ModelSpec::validate() const {
  if (width == 0 || width % 2 == 0) throw std::invalid_argument("model width must be odd");
  if (history == 0) throw std::invalid_argument("model history must be >= 1");
  if (channels != 2 && channels != 3) throw std::invalid_argument("model channels must be 2 or 3");
  if (units() == 0) throw std::invalid_argument("hidden size must be >= 1");
  if (kind == ModelKind::conv && conv_filters() == 0) {
    throw std::invalid_argument("conv model needs at least one filter");
  }
}

void to_json(json& j, const ModelSpec& s) {
  j = json{{"kind", to_string(s.kind)}, {"hidden", s.hidden},
           {"width", s.width},          {"history", s.history},
           {"channels", s.channels},    {"filters", s.filters},
           {"gru_reset_after", s.gru_reset_after}};
}

void from_json(const json& j, ModelSpec& s) {
  require_known_keys(j, {"kind", "hidden", "width", "history", "channels", "filters",
                         "gru_reset_after"},
                     "model");
  if (j.contains("kind")) s.kind = model_kind_from_string(j.at("kind").get<std::string>());
  read_optional(j, "hidden", s.hidden);
  read_optional(j, "width", s.width);
  read_optional(j, "history", s.history);
  read_optional(j, "channels", s.channels);
  read_optional(j, "filters", s.filters);
  read_optional(j, "gru_reset_after", s.gru_reset_after);
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw std::out_of_range("no parameter named '" + name + "'");
}

const Tensor& ParameterSet::at(const std::string& name) const {
  return tensors[index_of(name)];
}

namespace {

struct Layout {
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> shapes;

  void dense(const std::string& prefix, std::size_t in, std::size_t out) {
    names.push_back(prefix + "/kernel");
    shapes.push_back({in, out});
    names.push_back(prefix + "/bias");
    shapes.push_back({out});
  }
};

Layout layout(const ModelSpec& s) {
  s.validate();
  const std::size_t wc = s.width * s.channels, k = s.units(), out = s.output_size();
  Layout l;
  switch (s.kind) {
    case ModelKind::linear:
      l.dense("out", wc, out);
      break;
    case ModelKind::dense:
      l.dense("td", wc, k);
      l.dense("hidden", s.history * k, k);
      l.dense("out", k, out);
      break;
    case ModelKind::conv:
      l.dense("conv", s.history * s.channels, s.conv_filters());
      l.dense("hidden", s.width * s.conv_filters(), k);
      l.dense("out", k, out);
      break;
    case ModelKind::gru:
      l.dense("td", wc, k);
      l.names.insert(l.names.end(), {"gru/kernel", "gru/recurrent", "gru/bias"});
      l.shapes.insert(l.shapes.end(), {{k, 3 * k}, {k, 3 * k}, {3 * k}});
      if (s.gru_reset_after) {
        l.names.push_back("gru/recurrent_bias");
        l.shapes.push_back({3 * k});
      }
      l.dense("out", k, out);
      break;
  }
  return l;
}

// Index map [B*W, H*C] <- [B, H*W*C] for the conv layer.
std::shared_ptr<const std::vector<std::uint32_t>> conv_index(const ModelSpec& s,
                                                             std::size_t batch) {
  const std::size_t h_n = s.history, w_n = s.width, c_n = s.channels;
  auto idx = std::make_shared<std::vector<std::uint32_t>>(batch * w_n * h_n * c_n);
  std::size_t o = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t w = 0; w < w_n; ++w) {
      for (std::size_t h = 0; h < h_n; ++h) {
        for (std::size_t c = 0; c < c_n; ++c) {
          (*idx)[o++] = static_cast<std::uint32_t>(b * s.input_size() + (h * w_n + w) * c_n + c);
        }
      }
    }
  }
  return idx;
}

}  // namespace

ParameterSet build_model(const ModelSpec& spec, std::uint64_t seed) {
  const Layout l = layout(spec);
  Rng rng(seed);
  ParameterSet p;
  p.names = l.names;
  for (const auto& shape : l.shapes) {
    Tensor t(shape, 0.0f);
    if (shape.size() == 2) {
      const double limit = std::sqrt(3.0 / static_cast<double>(shape[0]));
      float* d = t.mutable_data();
      for (std::size_t i = 0; i < t.size(); ++i) {
        d[i] = static_cast<float>(rng.uniform(-limit, limit));
      }
    }
    p.tensors.push_back(std::move(t));
  }
  return p;
}

std::size_t parameter_count(const ModelSpec& spec) {
  std::size_t n = 0;
  for (const auto& s : layout(spec).shapes) n += ad::shape_size(s);
  return n;
}

ForwardPass forward(ad::Tape& tape, const ModelSpec& spec, const ParameterSet& params,
                    Var input, bool track_params) {
  const Layout l = layout(spec);
  if (params.names != l.names) throw std::invalid_argument("parameter set does not match the model spec");
  for (std::size_t i = 0; i < l.shapes.size(); ++i) {
    if (params.tensors[i].shape() != l.shapes[i]) {
      throw std::invalid_argument("parameter '" + l.names[i] + "' has the wrong shape");
    }
  }
  const Tensor x = input.value();  // tape nodes move as leaves are added
  if (x.rank() != 2 || x.cols() != spec.input_size()) {
    throw std::invalid_argument("model input must be [B, " + std::to_string(spec.input_size()) + "]");
  }
  ForwardPass f;
  for (const auto& t : params.tensors) {
    f.params.push_back(track_params ? tape.leaf(t) : tape.constant(t));
  }
  auto p = [&](const char* name) { return f.params[params.index_of(name)]; };
  auto dense = [&](Var in, const std::string& prefix) {
    return ad::add_bias(ad::matmul(in, p((prefix + "/kernel").c_str())),
                        p((prefix + "/bias").c_str()));
  };

  const std::size_t batch = x.rows();
  const std::size_t wc = spec.width * spec.channels, k = spec.units();
  Var out;
  switch (spec.kind) {
    case ModelKind::linear: {
      const Var last = ad::slice_cols(input, (spec.history - 1) * wc, wc);
      out = dense(last, "out");
      break;
    }
    case ModelKind::dense: {
      const Var steps = ad::reshape(input, {batch * spec.history, wc});
      const Var td = ad::relu(dense(steps, "td"));
      const Var flat = ad::reshape(td, {batch, spec.history * k});
      out = dense(ad::relu(dense(flat, "hidden")), "out");
      break;
    }
    case ModelKind::conv: {
      const std::size_t f_n = spec.conv_filters();
      const Var cols = ad::gather(input, conv_index(spec, batch),
                                  {batch * spec.width, spec.history * spec.channels});
      const Var maps = ad::relu(dense(cols, "conv"));
      const Var flat = ad::reshape(maps, {batch, spec.width * f_n});
      out = dense(ad::relu(dense(flat, "hidden")), "out");
      break;
    }
    case ModelKind::gru: {
      const Var steps = ad::reshape(input, {batch * spec.history, wc});
      const Var td = ad::reshape(ad::relu(dense(steps, "td")), {batch, spec.history * k});
      const ad::GruWeights w =
          spec.gru_reset_after
              ? ad::gru_weights(p("gru/kernel"), p("gru/recurrent"), p("gru/bias"),
                                p("gru/recurrent_bias"))
              : ad::gru_weights(p("gru/kernel"), p("gru/recurrent"), p("gru/bias"));
      Var h = tape.constant(Tensor({batch, k}, 0.0f));
      for (std::size_t t = 0; t < spec.history; ++t) {
        h = ad::gru_cell(ad::slice_cols(td, t * k, k), h, w);
      }
      out = dense(h, "out");
      break;
    }
  }
  f.output = out;
  return f;
}

void predict(const ModelSpec& spec, const ParameterSet& params, const float* inputs,
             std::size_t batch, float* outputs) {
  ad::Tape tape;
  const Var x = tape.constant(
      Tensor({batch, spec.input_size()},
             std::vector<float>(inputs, inputs + batch * spec.input_size())));
  const ForwardPass f = forward(tape, spec, params, x, false);
  const Tensor& y = f.output.value();
  std::copy(y.data(), y.data() + y.size(), outputs);
}

}  // namespace qdemu
