#pragma once

// Dense row-major tensor with reverse-mode automatic differentiation.
// Tensors are value types over shared storage; a Tape records primitive
// applications and replays them in reverse for backward_all.

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mulab/errors.hpp"

namespace mulab {

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

template <typename T>
class Tensor {
 public:
  Tensor() : s_(std::make_shared<Storage>()) {}

  explicit Tensor(std::vector<int> shape, bool requires_grad = false)
      : s_(std::make_shared<Storage>()) {
    std::int64_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw ShapeError("non-positive dimension in " + shape_str(shape));
      n *= d;
    }
    s_->shape = std::move(shape);
    s_->data.assign(static_cast<std::size_t>(n), T(0));
    s_->requires_grad = requires_grad;
  }

  Tensor(std::vector<int> shape, std::vector<T> data, bool requires_grad = false)
      : Tensor(std::move(shape), requires_grad) {
    if (data.size() != s_->data.size())
      throw ShapeError("data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(s_->shape));
    s_->data = std::move(data);
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return Tensor({1}, {v}, requires_grad);
  }

  const std::vector<int>& shape() const { return s_->shape; }
  int dim(int i) const { return s_->shape.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(s_->shape.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(s_->data.size()); }

  T* data() { return s_->data.data(); }
  const T* data() const { return s_->data.data(); }
  std::vector<T>& vec() { return s_->data; }
  const std::vector<T>& vec() const { return s_->data; }

  T& operator[](std::int64_t i) { return s_->data[static_cast<std::size_t>(i)]; }
  T operator[](std::int64_t i) const { return s_->data[static_cast<std::size_t>(i)]; }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool rg) { s_->requires_grad = rg; }

  bool has_grad() const { return !s_->grad.empty(); }

  // Lazily allocated, zero-initialized, same length as data.
  std::vector<T>& grad() {
    if (s_->grad.empty()) s_->grad.assign(s_->data.size(), T(0));
    return s_->grad;
  }
  const std::vector<T>& grad() const { return s_->grad; }

  void zero_grad() {
    if (!s_->grad.empty()) std::fill(s_->grad.begin(), s_->grad.end(), T(0));
  }

  // Deep copy of values (grad not copied).
  Tensor clone() const {
    Tensor t(s_->shape, s_->data, s_->requires_grad);
    return t;
  }

  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

 private:
  struct Storage {
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

// Ordered record of primitive applications. Nodes are appended in forward
// (topological) order; backward traverses the list exactly once in reverse.
template <typename T>
class Tape {
 public:
  void record(std::function<void()> backward_fn, Tensor<T> output) {
    nodes_.push_back(std::move(backward_fn));
    outputs_.push_back(std::move(output));
  }

  std::size_t size() const { return nodes_.size(); }

  void run_backward() {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

  // Resets the gradients of every recorded node output, so a subsequent
  // backward pass (with leaf grads also reset) reproduces gradients
  // bit-for-bit.
  void zero_grads() {
    for (auto& t : outputs_) t.zero_grad();
  }

  void clear() {
    nodes_.clear();
    outputs_.clear();
  }

 private:
  std::vector<std::function<void()>> nodes_;
  std::vector<Tensor<T>> outputs_;
};

// Seeds d(loss)/d(loss) = 1 and propagates gradients to every
// requires_grad tensor recorded on the tape. Accumulation is additive, so
// a tensor used twice receives the sum of both contributions.
template <typename T>
void backward_all(Tensor<T> loss, Tape<T>& tape) {
  if (loss.size() != 1)
    throw ContractError("backward_all requires a scalar loss, got shape " +
                        shape_str(loss.shape()));
  loss.grad()[0] += T(1);
  tape.run_backward();
}

using Tensorf = Tensor<float>;
using Tapef = Tape<float>;

}  // namespace mulab
