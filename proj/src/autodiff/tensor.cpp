#include <stdexcept>
#include <string>

#include "qdemu/autodiff.hpp"

namespace qdemu::ad {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, float fill)
    : shape_(std::move(shape)),
      data_(std::make_shared<Storage>(shape_size(shape_), fill)) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> values)
    : shape_(std::move(shape)) {
  if (values.size() != shape_size(shape_)) {
    throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                " does not match its shape");
  }
  data_ = std::make_shared<Storage>(values.begin(), values.end());
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
  return r;
}

std::size_t Tensor::cols() const { return shape_.empty() ? 1 : shape_.back(); }

float* Tensor::mutable_data() {
  if (!data_) return nullptr;
  if (data_.use_count() > 1) data_ = std::make_shared<Storage>(*data_);
  return data_->data();
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (shape_size(shape) != size()) throw std::invalid_argument("reshape changes the element count");
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

const Tensor& Var::value() const { return tape->value(*this); }
const Tensor& Var::grad() const { return tape->grad(*this); }

Var Tape::push(Tensor value, bool requires_grad, Backward backward) {
  nodes_.push_back({std::move(value), Tensor{}, requires_grad,
                    requires_grad ? std::move(backward) : Backward{}});
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (!n.grad.empty() || n.value.empty()) return n.grad;
  zero_ = Tensor(n.value.shape(), 0.0f);
  return zero_;
}

float* Tape::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0f);
  return n.grad.mutable_data();
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("loss belongs to another tape");
  if (nodes_.at(loss.id).value.size() != 1) {
    throw std::invalid_argument("backward needs a scalar loss");
  }
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss)[0] += 1.0f;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

}  // namespace qdemu::ad
