#pragma once

// Dense float32 tensors and a reverse-mode tape covering what the four
// emulator architectures need. Operations work on row-major matrices; a
// rank-1 tensor [n] is treated as one row where a matrix is expected.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "qdemu/buffer_pool.hpp"

namespace qdemu::ad {

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, float fill = 0.0f);
  Tensor(std::vector<std::size_t> shape, std::vector<float> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_ ? data_->size() : 0; }
  bool empty() const { return size() == 0; }
  // Matrix view: cols = last dimension, rows = everything before it.
  std::size_t rows() const;
  std::size_t cols() const;

  const float* data() const { return data_ ? data_->data() : nullptr; }
  // Copy-on-write: detaches shared storage before handing out a pointer.
  float* mutable_data();
  std::span<const float> values() const { return {data(), size()}; }
  float operator[](std::size_t i) const { return (*data_)[i]; }

  // Shares storage.
  Tensor reshaped(std::vector<std::size_t> shape) const;
  bool shares_storage_with(const Tensor& other) const { return data_ == other.data_; }

 private:
  std::vector<std::size_t> shape_;
  using Storage = std::vector<float, detail::PoolAllocator<float>>;
  std::shared_ptr<Storage> data_;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

  Var constant(Tensor value) { return push(std::move(value), false, {}); }
  Var leaf(Tensor value) { return push(std::move(value), true, {}); }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  // Zero-filled when nothing reached the node.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d loss / d loss = 1 and visits nodes in reverse creation order.
  // Throws on a non-scalar loss.
  void backward(Var loss);

  // Used by operations.
  Var push(Tensor value, bool requires_grad, Backward backward);
  // Gradient buffer of v, allocated on first use.
  float* grad_buffer(Var v);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
  mutable Tensor zero_;
};

// Primitives. All throw std::invalid_argument on shape mismatch.
Var matmul(Var a, Var b);                  // [M,K] x [K,N]
Var add(Var a, Var b);                     // same shape
Var sub(Var a, Var b);
Var mul(Var a, Var b);                     // elementwise
Var add_bias(Var x, Var bias);             // [M,N] + [N]
Var affine(Var x, float scale, float shift);  // scale * x + shift
Var relu(Var x);
Var sigmoid(Var x);
Var concat_cols(const std::vector<Var>& parts);  // along the last dimension
Var slice_cols(Var x, std::size_t start, std::size_t count);
Var reshape(Var x, std::vector<std::size_t> shape);
// out[i] = x[index[i]] over the flat data; gradient scatter-adds.
Var gather(Var x, std::shared_ptr<const std::vector<std::uint32_t>> index,
           std::vector<std::size_t> shape);
Var sum_square(Var x, float scale = 1.0f);  // scale * sum x^2, shape [1]
Var mean_square(Var x);

// GRU with gate order (z, r, h) in the packed kernel [K_in, 3K],
// recurrent [K, 3K] and bias [3K]. The candidate uses ReLU.
//   z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br)
//   single bias: c = relu(x Wh + (r * h) Uh + bh)
//   reset after: c = relu(x Wh + bh + r * (h Uh + rbh)), rb = recurrent_bias
//   h' = h + z * (c - h)
struct GruWeights {
  Var kernel;
  Var recurrent_zr;  // [K, 2K] slice of recurrent
  Var recurrent_h;   // [K, K]
  Var bias;
  bool reset_after = false;
  Var recurrent_bias_zr;  // reset_after only
  Var recurrent_bias_h;
  std::size_t units = 0;
};

GruWeights gru_weights(Var kernel, Var recurrent, Var bias);
GruWeights gru_weights(Var kernel, Var recurrent, Var bias, Var recurrent_bias);
Var gru_cell(Var x, Var h, const GruWeights& w);

}  // namespace qdemu::ad
