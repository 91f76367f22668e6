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

// Differentiable operations on Tensor<Scalar>.
//
// Each op validates finiteness and shapes, computes its value eagerly, and
// records a backward rule on the thread's active tape when any input
// requires a gradient. Broadcasting is limited to adding a rank-1 bias to
// every row of a rank-2 tensor.

#ifndef RANDCHECK_OPS_H_
#define RANDCHECK_OPS_H_

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "randcheck/tensor.h"

namespace randcheck::autodiff {
namespace internal {

template <typename Scalar>
void RequireFinite(const char* op, const Tensor<Scalar>& t) {
  if (!t.value().allFinite()) {
    throw NumericError(std::string(op) + ": non-finite input of shape " +
                       ShapeString(t.shape()));
  }
}

[[noreturn]] inline void ShapeMismatch(const char* op, const Shape& a,
                                       const Shape& b) {
  throw ContractError(std::string(op) + ": shape mismatch " + ShapeString(a) +
                      " vs " + ShapeString(b));
}

template <typename Scalar>
Tensor<Scalar> Finish(const char* op, std::vector<Tensor<Scalar>> inputs,
                      Shape shape, typename Tensor<Scalar>::Matrix value,
                      typename Tape<Scalar>::BackwardFn backward) {
  if (!value.allFinite()) {
    throw NumericError(std::string(op) + ": produced a non-finite value");
  }
  bool track = false;
  for (const auto& in : inputs) track = track || in.requires_grad();
  Tensor<Scalar> out(std::move(shape), std::move(value), track);
  if (track) {
    if (Tape<Scalar>* tape = Tape<Scalar>::Active()) {
      tape->Push(op, std::move(inputs), out, std::move(backward));
    }
  }
  return out;
}

// Row-wise numerically stable softmax.
template <typename Matrix>
Matrix SoftmaxRows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    auto shifted = (x.row(r).array() - x.row(r).maxCoeff()).exp();
    y.row(r) = shifted / shifted.sum();
  }
  return y;
}

}  // namespace internal

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("matmul", a);
  internal::RequireFinite("matmul", b);
  if (a.rank() == 0 || b.rank() != 2 || a.shape().back() != b.shape()[0]) {
    internal::ShapeMismatch("matmul", a.shape(), b.shape());
  }
  Shape shape = a.rank() == 1 ? Shape{b.shape()[1]}
                              : Shape{a.shape()[0], b.shape()[1]};
  Matrix value = a.value() * b.value();
  return internal::Finish<Scalar>(
      "matmul", {a, b}, std::move(shape), std::move(value),
      [a, b](const Matrix& g) {
        return std::vector<Matrix>{g * b.value().transpose(),
                                   a.value().transpose() * g};
      });
}

// Elementwise sum of equal shapes, or rank-2 [n,m] plus a rank-1 [m] bias.
template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("add", a);
  internal::RequireFinite("add", b);
  if (a.shape() == b.shape()) {
    return internal::Finish<Scalar>(
        "add", {a, b}, a.shape(), a.value() + b.value(),
        [](const Matrix& g) { return std::vector<Matrix>{g, g}; });
  }
  if (a.rank() == 2 && b.rank() == 1 && a.shape()[1] == b.shape()[0]) {
    Matrix value = a.value().rowwise() + b.value().row(0);
    return internal::Finish<Scalar>(
        "add", {a, b}, a.shape(), std::move(value), [](const Matrix& g) {
          return std::vector<Matrix>{g, g.colwise().sum()};
        });
  }
  internal::ShapeMismatch("add", a.shape(), b.shape());
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("sub", a);
  internal::RequireFinite("sub", b);
  if (a.shape() != b.shape()) internal::ShapeMismatch("sub", a.shape(), b.shape());
  return internal::Finish<Scalar>(
      "sub", {a, b}, a.shape(), a.value() - b.value(),
      [](const Matrix& g) { return std::vector<Matrix>{g, -g}; });
}

// Elementwise (Hadamard) product.
template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("mul", a);
  internal::RequireFinite("mul", b);
  if (a.shape() != b.shape()) internal::ShapeMismatch("mul", a.shape(), b.shape());
  Matrix value = a.value().cwiseProduct(b.value());
  return internal::Finish<Scalar>(
      "mul", {a, b}, a.shape(), std::move(value), [a, b](const Matrix& g) {
        return std::vector<Matrix>{g.cwiseProduct(b.value()),
                                   g.cwiseProduct(a.value())};
      });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar factor) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("scale", a);
  return internal::Finish<Scalar>(
      "scale", {a}, a.shape(), a.value() * factor,
      [factor](const Matrix& g) { return std::vector<Matrix>{g * factor}; });
}

// Subgradient 0 at exactly 0.
template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("relu", a);
  Matrix value = a.value().cwiseMax(Scalar(0));
  return internal::Finish<Scalar>(
      "relu", {a}, a.shape(), std::move(value), [a](const Matrix& g) {
        Matrix mask = (a.value().array() > Scalar(0)).template cast<Scalar>();
        return std::vector<Matrix>{g.cwiseProduct(mask)};
      });
}

// Softmax along `axis`: 0 for rank-1 inputs; 0 (columns) or 1 (rows) for
// rank-2 inputs.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& a, int axis) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("softmax", a);
  const bool rows = (a.rank() == 1 && axis == 0) || (a.rank() == 2 && axis == 1);
  const bool cols = a.rank() == 2 && axis == 0;
  if (!rows && !cols) {
    throw ContractError("softmax: invalid axis " + std::to_string(axis) +
                        " for shape " + ShapeString(a.shape()));
  }
  Matrix y = rows ? internal::SoftmaxRows(a.value())
                  : Matrix(internal::SoftmaxRows<Matrix>(a.value().transpose())
                               .transpose());
  return internal::Finish<Scalar>(
      "softmax", {a}, a.shape(), y, [y, rows](const Matrix& g) {
        Matrix gy = g.cwiseProduct(y);
        Matrix dx;
        if (rows) {
          dx = gy - y.cwiseProduct(gy.rowwise().sum().replicate(1, y.cols()));
        } else {
          dx = gy - y.cwiseProduct(gy.colwise().sum().replicate(y.rows(), 1));
        }
        return std::vector<Matrix>{std::move(dx)};
      });
}

// Gathers rows of a [V,D] table; the result is [L,D].
template <typename Scalar>
Tensor<Scalar> embedding_lookup(const Tensor<Scalar>& table,
                                std::span<const int> ids) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("embedding_lookup", table);
  if (table.rank() != 2) {
    throw ContractError("embedding_lookup: table must be rank 2, got " +
                        ShapeString(table.shape()));
  }
  const Eigen::Index vocab = table.shape()[0];
  Matrix value(static_cast<Eigen::Index>(ids.size()), table.shape()[1]);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab) {
      throw ContractError("embedding_lookup: id " + std::to_string(ids[i]) +
                          " outside table of shape " +
                          ShapeString(table.shape()));
    }
    value.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> rows(ids.begin(), ids.end());
  return internal::Finish<Scalar>(
      "embedding_lookup", {table},
      Shape{static_cast<Eigen::Index>(ids.size()), table.shape()[1]},
      std::move(value), [rows, table](const Matrix& g) {
        Matrix dt = Matrix::Zero(table.shape()[0], table.shape()[1]);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          dt.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
        }
        return std::vector<Matrix>{std::move(dt)};
      });
}

// [n,m] -> [m], averaging over rows.
template <typename Scalar>
Tensor<Scalar> mean_rows(const Tensor<Scalar>& a) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("mean_rows", a);
  if (a.rank() != 2 || a.shape()[0] == 0) {
    throw ContractError("mean_rows: expected non-empty rank-2 input, got " +
                        ShapeString(a.shape()));
  }
  const Eigen::Index n = a.shape()[0];
  Matrix value = a.value().colwise().mean();
  return internal::Finish<Scalar>(
      "mean_rows", {a}, Shape{a.shape()[1]}, std::move(value),
      [n](const Matrix& g) {
        return std::vector<Matrix>{g.replicate(n, 1) / Scalar(n)};
      });
}

// Row-wise normalization of [n,m] with gain and bias of shape [m].
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gain,
                          const Tensor<Scalar>& bias, Scalar eps = 1e-5) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("layer_norm", x);
  internal::RequireFinite("layer_norm", gain);
  internal::RequireFinite("layer_norm", bias);
  if (x.rank() != 2) {
    throw ContractError("layer_norm: expected rank-2 input, got " +
                        ShapeString(x.shape()));
  }
  if (gain.shape() != Shape{x.shape()[1]}) {
    internal::ShapeMismatch("layer_norm", x.shape(), gain.shape());
  }
  if (bias.shape() != gain.shape()) {
    internal::ShapeMismatch("layer_norm", gain.shape(), bias.shape());
  }
  const Eigen::Index n = x.shape()[0];
  const Eigen::Index m = x.shape()[1];
  Matrix normalized(n, m);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Scalar mu = x.value().row(r).mean();
    const Scalar var =
        (x.value().row(r).array() - mu).square().sum() / Scalar(m);
    inv_std(r) = Scalar(1) / std::sqrt(var + eps);
    normalized.row(r) = (x.value().row(r).array() - mu) * inv_std(r);
  }
  Matrix value = (normalized.array().rowwise() * gain.value().row(0).array())
                     .rowwise() +
                 bias.value().row(0).array();
  return internal::Finish<Scalar>(
      "layer_norm", {x, gain, bias}, x.shape(), std::move(value),
      [normalized, inv_std, gain, m](const Matrix& g) {
        Matrix dnorm = g.array().rowwise() * gain.value().row(0).array();
        Matrix dx(dnorm.rows(), dnorm.cols());
        for (Eigen::Index r = 0; r < dnorm.rows(); ++r) {
          const Scalar sum_d = dnorm.row(r).sum();
          const Scalar sum_dn = dnorm.row(r).dot(normalized.row(r));
          dx.row(r) = (Scalar(m) * dnorm.row(r).array() - sum_d -
                       normalized.row(r).array() * sum_dn) *
                      (inv_std(r) / Scalar(m));
        }
        Matrix dgain = g.cwiseProduct(normalized).colwise().sum();
        Matrix dbias = g.colwise().sum();
        return std::vector<Matrix>{std::move(dx), std::move(dgain),
                                   std::move(dbias)};
      });
}

// Fused log-softmax + negative log-likelihood, averaged over rows.
// `logits` is [K] with one target, or [B,K] with B targets; axis must name
// the class axis (0 for rank 1, 1 for rank 2).
template <typename Scalar>
Tensor<Scalar> cross_entropy(const Tensor<Scalar>& logits,
                             std::span<const int> targets, int axis) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("cross_entropy", logits);
  const bool ok_axis = (logits.rank() == 1 && axis == 0) ||
                       (logits.rank() == 2 && axis == 1);
  if (!ok_axis) {
    throw ContractError("cross_entropy: class axis " + std::to_string(axis) +
                        " invalid for shape " + ShapeString(logits.shape()));
  }
  const Matrix& x = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != x.rows()) {
    throw ContractError("cross_entropy: " + std::to_string(targets.size()) +
                        " targets for " + std::to_string(x.rows()) + " rows");
  }
  Matrix probs(x.rows(), x.cols());
  Scalar loss = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= x.cols()) {
      throw ContractError("cross_entropy: target " + std::to_string(t) +
                          " outside " + std::to_string(x.cols()) + " classes");
    }
    const Scalar max = x.row(r).maxCoeff();
    const Scalar lse =
        max + std::log((x.row(r).array() - max).exp().sum());
    loss += lse - x(r, t);
    probs.row(r) = (x.row(r).array() - lse).exp();
  }
  const Scalar batch = Scalar(x.rows());
  std::vector<int> t(targets.begin(), targets.end());
  Matrix value(1, 1);
  value(0, 0) = loss / batch;
  return internal::Finish<Scalar>(
      "cross_entropy", {logits}, Shape{}, std::move(value),
      [probs, t, batch](const Matrix& g) {
        Matrix d = probs;
        for (std::size_t r = 0; r < t.size(); ++r) {
          d(static_cast<Eigen::Index>(r), t[r]) -= Scalar(1);
        }
        return std::vector<Matrix>{d * (g(0, 0) / batch)};
      });
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("transpose", a);
  if (a.rank() != 2) {
    throw ContractError("transpose: expected rank 2, got " +
                        ShapeString(a.shape()));
  }
  Matrix value = a.value().transpose();
  return internal::Finish<Scalar>(
      "transpose", {a}, Shape{a.shape()[1], a.shape()[0]}, std::move(value),
      [](const Matrix& g) {
        return std::vector<Matrix>{Matrix(g.transpose())};
      });
}

// Sum of all elements; rank 0 result.
template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("sum", a);
  Matrix value(1, 1);
  value(0, 0) = a.value().sum();
  const Eigen::Index rows = a.value().rows();
  const Eigen::Index cols = a.value().cols();
  return internal::Finish<Scalar>(
      "sum", {a}, Shape{}, std::move(value), [rows, cols](const Matrix& g) {
        return std::vector<Matrix>{Matrix::Constant(rows, cols, g(0, 0))};
      });
}

// Element `index` of a rank-1 tensor, as rank 0.
template <typename Scalar>
Tensor<Scalar> select(const Tensor<Scalar>& a, Eigen::Index index) {
  using Matrix = typename Tensor<Scalar>::Matrix;
  internal::RequireFinite("select", a);
  if (a.rank() != 1 || index < 0 || index >= a.shape()[0]) {
    throw ContractError("select: index " + std::to_string(index) +
                        " invalid for shape " + ShapeString(a.shape()));
  }
  Matrix value(1, 1);
  value(0, 0) = a.value()(0, index);
  const Eigen::Index n = a.shape()[0];
  return internal::Finish<Scalar>(
      "select", {a}, Shape{}, std::move(value), [n, index](const Matrix& g) {
        Matrix d = Matrix::Zero(1, n);
        d(0, index) = g(0, 0);
        return std::vector<Matrix>{std::move(d)};
      });
}

}  // namespace randcheck::autodiff

#endif  // RANDCHECK_OPS_H_
