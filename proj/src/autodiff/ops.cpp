#include <cmath>
#include <stdexcept>
#include <string>

#include "qdemu/autodiff.hpp"
#include "qdemu/kernels.hpp"

namespace qdemu::ad {
namespace {

std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
}

Tape& tape_of(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw std::invalid_argument("vars on different tapes");
  return *a.tape;
}

bool any_grad(Tape& t, std::initializer_list<Var> vs) {
  for (Var v : vs) {
    if (t.requires_grad(v)) return true;
  }
  return false;
}

template <typename F>
Var unary(Var x, F&& f, Tape::Backward bw) {
  Tape& t = *x.tape;
  const Tensor& in = t.value(x);
  Tensor out(in.shape());
  float* o = out.mutable_data();
  const float* p = in.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(p[i]);
  return t.push(std::move(out), t.requires_grad(x), std::move(bw));
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) mismatch("matmul", av, bv);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out({m, n});
  kernels::gemm_nn(m, n, k, av.data(), bv.data(), out.mutable_data(), false);
  return t.push(std::move(out), any_grad(t, {a, b}), [a, b, m, n, k](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) {
      kernels::gemm_nt(m, k, n, g.data(), t.value(b).data(), t.grad_buffer(a), true);
    }
    if (t.requires_grad(b)) {
      kernels::gemm_tn(k, n, m, t.value(a).data(), g.data(), t.grad_buffer(b), true);
    }
  });
}

namespace {

enum class Binary { add, sub, mul };

template <Binary kind>
Var binary(Var a, Var b, const char* name) {
  Tape& t = tape_of(a, b);
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  if (av.shape() != bv.shape()) mismatch(name, av, bv);
  Tensor out(av.shape());
  float* o = out.mutable_data();
  const float* p = av.data();
  const float* q = bv.data();
  const std::size_t n = av.size();
  for (std::size_t i = 0; i < n; ++i) {
    if constexpr (kind == Binary::add) o[i] = p[i] + q[i];
    if constexpr (kind == Binary::sub) o[i] = p[i] - q[i];
    if constexpr (kind == Binary::mul) o[i] = p[i] * q[i];
  }
  return t.push(std::move(out), any_grad(t, {a, b}), [a, b, n](Tape& t, const Tensor& g) {
    const float* gp = g.data();
    if (t.requires_grad(a)) {
      float* da = t.grad_buffer(a);
      const float* q = t.value(b).data();
      for (std::size_t i = 0; i < n; ++i) {
        if constexpr (kind == Binary::mul) da[i] += gp[i] * q[i];
        else da[i] += gp[i];
      }
    }
    if (t.requires_grad(b)) {
      float* db = t.grad_buffer(b);
      const float* p = t.value(a).data();
      for (std::size_t i = 0; i < n; ++i) {
        if constexpr (kind == Binary::add) db[i] += gp[i];
        if constexpr (kind == Binary::sub) db[i] -= gp[i];
        if constexpr (kind == Binary::mul) db[i] += gp[i] * p[i];
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return binary<Binary::add>(a, b, "add"); }
Var sub(Var a, Var b) { return binary<Binary::sub>(a, b, "sub"); }
Var mul(Var a, Var b) { return binary<Binary::mul>(a, b, "mul"); }

Var add_bias(Var x, Var bias) {
  Tape& t = tape_of(x, bias);
  const Tensor& xv = t.value(x);
  const Tensor& bv = t.value(bias);
  if (bv.rank() != 1 || xv.cols() != bv.size()) mismatch("add_bias", xv, bv);
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor out(xv.shape());
  float* o = out.mutable_data();
  const float* p = xv.data();
  const float* q = bv.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) o[r * cols + c] = p[r * cols + c] + q[c];
  }
  return t.push(std::move(out), any_grad(t, {x, bias}),
                [x, bias, rows, cols](Tape& t, const Tensor& g) {
                  const float* gp = g.data();
                  if (t.requires_grad(x)) {
                    float* dx = t.grad_buffer(x);
                    for (std::size_t i = 0; i < rows * cols; ++i) dx[i] += gp[i];
                  }
                  if (t.requires_grad(bias)) {
                    float* db = t.grad_buffer(bias);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t c = 0; c < cols; ++c) db[c] += gp[r * cols + c];
                    }
                  }
                });
}

Var affine(Var x, float scale, float shift) {
  const std::size_t n = x.value().size();
  return unary(x, [=](float v) { return scale * v + shift; },
               [x, n, scale](Tape& t, const Tensor& g) {
                 float* dx = t.grad_buffer(x);
                 for (std::size_t i = 0; i < n; ++i) dx[i] += scale * g[i];
               });
}

Var relu(Var x) {
  const std::size_t n = x.value().size();
  return unary(x, [](float v) { return v > 0.0f ? v : 0.0f; },
               [x, n](Tape& t, const Tensor& g) {
                 float* dx = t.grad_buffer(x);
                 const float* in = t.value(x).data();
                 for (std::size_t i = 0; i < n; ++i) {
                   if (in[i] > 0.0f) dx[i] += g[i];
                 }
               });
}

Var sigmoid(Var x) {
  Tape& t = *x.tape;
  const std::size_t n = x.value().size();
  const std::uint32_t out_id = static_cast<std::uint32_t>(t.size());
  return unary(x, [](float v) { return 1.0f / (1.0f + std::exp(-v)); },
               [x, n, out_id](Tape& t, const Tensor& g) {
                 float* dx = t.grad_buffer(x);
                 const float* y = t.value(Var{&t, out_id}).data();
                 const float* in = t.value(x).data();
                 // 1 - y as sigmoid(-x): no cancellation when y is near 1.
                 for (std::size_t i = 0; i < n; ++i) {
                   dx[i] += g[i] * y[i] / (1.0f + std::exp(in[i]));
                 }
               });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape& t = *parts[0].tape;
  const std::size_t rows = t.value(parts[0]).rows();
  std::size_t cols = 0;
  bool needs = false;
  for (Var p : parts) {
    tape_of(parts[0], p);
    if (t.value(p).rows() != rows) mismatch("concat_cols", t.value(parts[0]), t.value(p));
    cols += t.value(p).cols();
    needs = needs || t.requires_grad(p);
  }
  auto shape = t.value(parts[0]).shape();
  if (shape.empty()) shape = {1};
  shape.back() = cols;
  Tensor out(shape);
  float* o = out.mutable_data();
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& v = t.value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(v.data() + r * v.cols(), v.data() + (r + 1) * v.cols(), o + r * cols + offset);
    }
    offset += v.cols();
  }
  return t.push(std::move(out), needs, [parts, rows, cols](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (Var p : parts) {
      const std::size_t pc = t.value(p).cols();
      if (t.requires_grad(p)) {
        float* dp = t.grad_buffer(p);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < pc; ++c) dp[r * pc + c] += g[r * cols + offset + c];
        }
      }
      offset += pc;
    }
  });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
  Tape& t = *x.tape;
  const Tensor& v = t.value(x);
  const std::size_t rows = v.rows(), cols = v.cols();
  if (start + count > cols || count == 0) {
    throw std::invalid_argument("slice_cols: columns [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") outside " +
                                shape_str(v.shape()));
  }
  auto shape = v.shape();
  shape.back() = count;
  Tensor out(shape);
  float* o = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(v.data() + r * cols + start, v.data() + r * cols + start + count, o + r * count);
  }
  return t.push(std::move(out), t.requires_grad(x),
                [x, rows, cols, start, count](Tape& t, const Tensor& g) {
                  float* dx = t.grad_buffer(x);
                  for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < count; ++c) {
                      dx[r * cols + start + c] += g[r * count + c];
                    }
                  }
                });
}

Var reshape(Var x, std::vector<std::size_t> shape) {
  Tape& t = *x.tape;
  Tensor out = t.value(x).reshaped(std::move(shape));
  const std::size_t n = out.size();
  return t.push(std::move(out), t.requires_grad(x), [x, n](Tape& t, const Tensor& g) {
    float* dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < n; ++i) dx[i] += g[i];
  });
}

Var gather(Var x, std::shared_ptr<const std::vector<std::uint32_t>> index,
           std::vector<std::size_t> shape) {
  Tape& t = *x.tape;
  const Tensor& v = t.value(x);
  if (!index || index->size() != shape_size(shape)) {
    throw std::invalid_argument("gather: index length does not match the output shape");
  }
  Tensor out(std::move(shape));
  float* o = out.mutable_data();
  const float* p = v.data();
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < index->size(); ++i) {
    const std::uint32_t k = (*index)[i];
    if (k >= n) throw std::invalid_argument("gather: index out of range");
    o[i] = p[k];
  }
  return t.push(std::move(out), t.requires_grad(x), [x, index](Tape& t, const Tensor& g) {
    float* dx = t.grad_buffer(x);
    for (std::size_t i = 0; i < index->size(); ++i) dx[(*index)[i]] += g[i];
  });
}

Var sum_square(Var x, float scale) {
  Tape& t = *x.tape;
  const Tensor& v = t.value(x);
  const std::size_t n = v.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(v[i]) * v[i];
  Tensor out({1}, static_cast<float>(scale * acc));
  return t.push(std::move(out), t.requires_grad(x), [x, n, scale](Tape& t, const Tensor& g) {
    float* dx = t.grad_buffer(x);
    const float* p = t.value(x).data();
    const float k = 2.0f * scale * g[0];
    for (std::size_t i = 0; i < n; ++i) dx[i] += k * p[i];
  });
}

Var mean_square(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw std::invalid_argument("mean_square of an empty tensor");
  return sum_square(x, 1.0f / static_cast<float>(n));
}

GruWeights gru_weights(Var kernel, Var recurrent, Var bias) {
  const Tensor& u = recurrent.value();
  if (u.rank() != 2 || u.cols() != 3 * u.rows()) {
    throw std::invalid_argument("gru recurrent kernel must be [K, 3K]");
  }
  const std::size_t k = u.rows();
  if (kernel.value().rank() != 2 || kernel.value().cols() != 3 * k) {
    throw std::invalid_argument("gru kernel must be [K_in, 3K]");
  }
  if (bias.value().rank() != 1 || bias.value().size() != 3 * k) {
    throw std::invalid_argument("gru bias must be [3K]");
  }
  GruWeights w;
  w.kernel = kernel;
  w.recurrent_zr = slice_cols(recurrent, 0, 2 * k);
  w.recurrent_h = slice_cols(recurrent, 2 * k, k);
  w.bias = bias;
  w.units = k;
  return w;
}

GruWeights gru_weights(Var kernel, Var recurrent, Var bias, Var recurrent_bias) {
  GruWeights w = gru_weights(kernel, recurrent, bias);
  if (recurrent_bias.value().rank() != 1 || recurrent_bias.value().size() != 3 * w.units) {
    throw std::invalid_argument("gru recurrent bias must be [3K]");
  }
  w.reset_after = true;
  w.recurrent_bias_zr = slice_cols(recurrent_bias, 0, 2 * w.units);
  w.recurrent_bias_h = slice_cols(recurrent_bias, 2 * w.units, w.units);
  return w;
}

Var gru_cell(Var x, Var h, const GruWeights& w) {
  const std::size_t k = w.units;
  if (h.value().rank() != 2 || h.value().cols() != k || x.value().rows() != h.value().rows()) {
    throw std::invalid_argument("gru_cell: state shape " + shape_str(h.value().shape()) +
                                " does not match " + std::to_string(k) + " units");
  }
  const Var xw = add_bias(matmul(x, w.kernel), w.bias);
  Var hzr = matmul(h, w.recurrent_zr);
  if (w.reset_after) hzr = add_bias(hzr, w.recurrent_bias_zr);
  const Var z = sigmoid(add(slice_cols(xw, 0, k), slice_cols(hzr, 0, k)));
  const Var r = sigmoid(add(slice_cols(xw, k, k), slice_cols(hzr, k, k)));
  Var pre;
  if (w.reset_after) {
    pre = add(slice_cols(xw, 2 * k, k),
              mul(r, add_bias(matmul(h, w.recurrent_h), w.recurrent_bias_h)));
  } else {
    pre = add(slice_cols(xw, 2 * k, k), matmul(mul(r, h), w.recurrent_h));
  }
  const Var cand = relu(pre);
  return add(h, mul(z, sub(cand, h)));
}

}  // namespace qdemu::ad
