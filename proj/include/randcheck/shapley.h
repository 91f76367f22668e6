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

// Shapley values over token coalitions.
//
// A coalition lists which token positions keep their own embedding; the
// others are replaced by the UNK embedding. KernelSHAP solves the
// kernel-weighted least squares problem with the efficiency constraint
// eliminated exactly, enumerating every proper coalition when the budget
// allows and otherwise enumerating the heaviest subset sizes and sampling
// the rest.

#ifndef RANDCHECK_SHAPLEY_H_
#define RANDCHECK_SHAPLEY_H_

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace randcheck::attribution {

using Coalition = std::vector<bool>;
using ValueFn = std::function<double(const Coalition&)>;

struct CoalitionMask {
  Coalition retained;
  double kernel_weight = 0.0;
};

// (L - 1) / (C(L, s) * s * (L - s)) for 0 < s < L.
double ShapKernelWeight(int length, int size);

// 2L + 2^11.
std::size_t DefaultCoalitionBudget(int length);

struct CoalitionSample {
  std::vector<CoalitionMask> masks;
  // Every proper coalition is present with its exact kernel weight.
  bool exhaustive = false;
};

// Never includes the empty or full coalition. Deterministic in seed.
CoalitionSample SampleCoalitions(int length, std::size_t budget, std::uint64_t seed);

struct KernelShapResult {
  Eigen::VectorXd values;
  // The normal equations were singular and a 1e-8 ridge was added.
  bool regularized = false;
  bool exhaustive = false;
  std::size_t evaluations = 0;
};

KernelShapResult KernelShap(const ValueFn& value, int length, std::size_t budget,
                            std::uint64_t seed);

// Solves the constrained WLS for given coalitions and their values.
KernelShapResult SolveKernelShap(const std::vector<CoalitionMask>& masks,
                                 const Eigen::VectorXd& values, double empty_value,
                                 double full_value);

inline constexpr int kMaxExactShapleyLength = 20;

// Classical Shapley values by full subset enumeration.
Eigen::VectorXd ExactShapley(const ValueFn& value, int length);

}  // namespace randcheck::attribution

#endif  // RANDCHECK_SHAPLEY_H_
