/*
 * Copyright 2026 The randcheck Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Dense rank-0/1/2 tensors with reverse-mode differentiation.
//
// A Tensor is a shared handle: copies alias the same storage, mirroring how
// graph nodes are referenced from a tape. Use clone() for a deep copy.
// Rank-1 tensors are stored as 1 x n row vectors and rank-0 tensors as 1 x 1
// matrices, so every kernel works on a single Eigen matrix type.

#ifndef RANDCHECK_TENSOR_H_
#define RANDCHECK_TENSOR_H_

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "randcheck/errors.h"

namespace randcheck::autodiff {

using Shape = std::vector<Eigen::Index>;

inline std::string ShapeString(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

template <typename Scalar>
class Tensor {
 public:
  using Matrix =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  // Rank-0 zero.
  Tensor() : Tensor(Shape{}, Matrix::Zero(1, 1)) {}

  Tensor(Shape shape, Matrix data, bool requires_grad = false)
      : impl_(std::make_shared<Impl>()) {
    if (shape.size() > 2) {
      throw ContractError("tensor: rank > 2 is not supported, got " +
                          ShapeString(shape));
    }
    Eigen::Index rows = shape.size() == 2 ? shape[0] : 1;
    Eigen::Index cols = shape.empty() ? 1 : shape.back();
    if (rows < 0 || cols < 0 || data.rows() != rows || data.cols() != cols) {
      throw ContractError("tensor: shape " + ShapeString(shape) +
                          " does not match storage " +
                          std::to_string(data.rows()) + "x" +
                          std::to_string(data.cols()));
    }
    if (!data.allFinite()) {
      throw NumericError("tensor: non-finite value in data");
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
  }

  static Tensor Scalar0(Scalar value, bool requires_grad = false) {
    Matrix m(1, 1);
    m(0, 0) = value;
    return Tensor(Shape{}, std::move(m), requires_grad);
  }

  template <typename Derived>
  static Tensor Vector(const Eigen::DenseBase<Derived>& values,
                       bool requires_grad = false) {
    Matrix m = values.derived().reshaped(1, values.size());
    return Tensor(Shape{values.size()}, std::move(m), requires_grad);
  }

  template <typename Derived>
  static Tensor FromMatrix(const Eigen::DenseBase<Derived>& values,
                           bool requires_grad = false) {
    Matrix m = values;
    Shape shape{m.rows(), m.cols()};
    return Tensor(std::move(shape), std::move(m), requires_grad);
  }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  Eigen::Index size() const { return impl_->data.size(); }

  const Matrix& value() const { return impl_->data; }
  // In-place parameter updates. Callers own the finiteness of what they write.
  Matrix& mutable_value() { return impl_->data; }

  Scalar item() const {
    if (size() != 1) {
      throw ContractError("item: tensor of shape " + ShapeString(shape()) +
                          " is not a single value");
    }
    return impl_->data(0, 0);
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }

  bool has_grad() const { return impl_->grad.has_value(); }
  const Matrix& grad() const {
    if (!impl_->grad) throw ContractError("grad: tensor has no gradient");
    return *impl_->grad;
  }
  void zero_grad() { impl_->grad.reset(); }
  void AccumulateGrad(const Matrix& g) {
    if (impl_->grad) {
      *impl_->grad += g;
    } else {
      impl_->grad = g;
    }
  }

  Tensor clone() const {
    Tensor copy(impl_->shape, impl_->data, impl_->requires_grad);
    copy.impl_->grad = impl_->grad;
    return copy;
  }

  // Identity of the underlying node.
  const void* id() const { return impl_.get(); }

 private:
  struct Impl {
    Shape shape;
    Matrix data;
    bool requires_grad = false;
    std::optional<Matrix> grad;
  };
  std::shared_ptr<Impl> impl_;
};

// Ordered record of differentiable operations.
//
// Operations executed while a Tape::Scope is alive on the current thread are
// appended in execution order, so inputs always precede their consumers.
// Backward is single-shot: a second call without reset() throws rather than
// accumulating the same contributions twice.
template <typename Scalar>
class Tape {
 public:
  using TensorType = Tensor<Scalar>;
  using Matrix = typename TensorType::Matrix;
  // Returns one gradient per input; an empty (0x0) matrix means "none".
  using BackwardFn = std::function<std::vector<Matrix>(const Matrix&)>;

  struct Record {
    std::string op;
    std::vector<TensorType> inputs;
    TensorType output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void Push(std::string op, std::vector<TensorType> inputs, TensorType output,
            BackwardFn backward) {
    if (consumed_) {
      throw ContractError("tape: cannot record '" + op +
                          "' after backward; call reset()");
    }
    records_.push_back(
        {std::move(op), std::move(inputs), std::move(output),
         std::move(backward)});
  }

  // Populates grad on every requires_grad tensor reachable from `output`.
  // Gradients are added to any existing grad, so callers zero between steps.
  void Backward(const TensorType& output) {
    if (consumed_) {
      throw ContractError("backward: tape already replayed; call reset()");
    }
    if (!output.shape().empty()) {
      throw ContractError("backward: output must be scalar, got shape " +
                          ShapeString(output.shape()));
    }
    bool on_tape = false;
    for (const Record& r : records_) {
      if (r.output.id() == output.id()) {
        on_tape = true;
        break;
      }
    }
    if (!on_tape) {
      throw ContractError("backward: output is not recorded on this tape");
    }
    consumed_ = true;

    std::unordered_map<const void*, Matrix> adjoint;
    std::unordered_map<const void*, TensorType> nodes;
    adjoint[output.id()] = Matrix::Ones(1, 1);
    nodes.emplace(output.id(), output);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      auto found = adjoint.find(it->output.id());
      if (found == adjoint.end()) continue;
      std::vector<Matrix> grads = it->backward(found->second);
      for (std::size_t i = 0; i < it->inputs.size(); ++i) {
        const TensorType& in = it->inputs[i];
        if (!in.requires_grad() || grads[i].size() == 0) continue;
        auto [slot, inserted] = adjoint.try_emplace(in.id(), grads[i]);
        if (!inserted) slot->second += grads[i];
        nodes.emplace(in.id(), in);
      }
    }
    for (auto& [id, node] : nodes) {
      if (node.requires_grad()) node.AccumulateGrad(adjoint.at(id));
    }
  }

  std::size_t size() const { return records_.size(); }
  const std::vector<Record>& records() const { return records_; }
  bool consumed() const { return consumed_; }
  void reset() {
    records_.clear();
    consumed_ = false;
  }

  static Tape* Active() { return active_; }

  // Installs a tape as the recording target for the current thread.
  class Scope {
   public:
    explicit Scope(Tape& tape) : previous_(active_) { active_ = &tape; }
    ~Scope() { active_ = previous_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

 private:
  std::vector<Record> records_;
  bool consumed_ = false;
  static thread_local Tape* active_;
};

template <typename Scalar>
thread_local Tape<Scalar>* Tape<Scalar>::active_ = nullptr;

using TensorXd = Tensor<double>;
using TapeXd = Tape<double>;
using RowMatrixXd = TensorXd::Matrix;

}  // namespace randcheck::autodiff

#endif  // RANDCHECK_TENSOR_H_
