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

#ifndef RANDCHECK_FINITE_DIFFERENCE_H_
#define RANDCHECK_FINITE_DIFFERENCE_H_

#include <functional>

#include "randcheck/tensor.h"

namespace randcheck::autodiff {

// Central-difference estimate (f(x + h e_i) - f(x - h e_i)) / 2h for every
// coordinate of x. `f` sees fresh tensors that do not require gradients.
template <typename Scalar>
Tensor<Scalar> finite_difference_gradient(
    const std::function<Scalar(const Tensor<Scalar>&)>& f,
    const Tensor<Scalar>& x, Scalar step) {
  if (!(step > Scalar(0))) {
    throw ContractError("finite_difference_gradient: step must be positive");
  }
  using Matrix = typename Tensor<Scalar>::Matrix;
  Matrix grad(x.value().rows(), x.value().cols());
  for (Eigen::Index r = 0; r < grad.rows(); ++r) {
    for (Eigen::Index c = 0; c < grad.cols(); ++c) {
      Matrix plus = x.value();
      Matrix minus = x.value();
      plus(r, c) += step;
      minus(r, c) -= step;
      const Scalar hi = f(Tensor<Scalar>(x.shape(), std::move(plus)));
      const Scalar lo = f(Tensor<Scalar>(x.shape(), std::move(minus)));
      grad(r, c) = (hi - lo) / (Scalar(2) * step);
    }
  }
  return Tensor<Scalar>(x.shape(), std::move(grad));
}

}  // namespace randcheck::autodiff

#endif  // RANDCHECK_FINITE_DIFFERENCE_H_
