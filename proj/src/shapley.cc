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

#include "randcheck/shapley.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>

#include "randcheck/errors.h"
#include "randcheck/random.h"

namespace randcheck::attribution {
namespace {

double Binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

Coalition Complement(const Coalition& c) {
  Coalition out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = !c[i];
  return out;
}

// Calls fn for every size-k subset of {0..n-1} in lexicographic order.
template <typename Fn>
void ForEachSubset(int n, int k, Fn&& fn) {
  std::vector<int> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    Coalition c(static_cast<std::size_t>(n), false);
    for (int i : idx) c[static_cast<std::size_t>(i)] = true;
    fn(c);
    int pos = k - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
    if (pos < 0) return;
    ++idx[static_cast<std::size_t>(pos)];
    for (int j = pos + 1; j < k; ++j) {
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
}

}  // namespace

double ShapKernelWeight(int length, int size) {
  if (size <= 0 || size >= length) {
    throw ContractError("ShapKernelWeight: size must lie strictly between 0 and L");
  }
  return (length - 1.0) / (Binomial(length, size) * size * (length - size));
}

std::size_t DefaultCoalitionBudget(int length) {
  return 2 * static_cast<std::size_t>(length) + 2048;
}

CoalitionSample SampleCoalitions(int length, std::size_t budget, std::uint64_t seed) {
  if (length < 2) return {{}, true};
  CoalitionSample out;
  const int n = length;
  const bool can_enumerate = n < 62 && (std::uint64_t{1} << n) - 2 <= budget;
  if (can_enumerate) {
    out.exhaustive = true;
    for (std::uint64_t bits = 1; bits + 1 < (std::uint64_t{1} << n); ++bits) {
      Coalition c(static_cast<std::size_t>(n));
      int size = 0;
      for (int i = 0; i < n; ++i) {
        c[static_cast<std::size_t>(i)] = (bits >> i) & 1U;
        size += c[static_cast<std::size_t>(i)];
      }
      out.masks.push_back({std::move(c), ShapKernelWeight(n, size)});
    }
    return out;
  }

  if (budget == 0) throw ContractError("SampleCoalitions: empty coalition budget");

  // Subset sizes s and L - s are handled together as one "paired" size.
  const int num_sizes = (n - 1 + 1) / 2;  // ceil((L - 1) / 2)
  const int num_paired = (n - 1) / 2;
  std::vector<double> weight(static_cast<std::size_t>(num_sizes));
  for (int s = 1; s <= num_sizes; ++s) {
    weight[static_cast<std::size_t>(s - 1)] = (n - 1.0) / (s * (n - s));
    if (s <= num_paired) weight[static_cast<std::size_t>(s - 1)] *= 2.0;
  }
  const double weight_total = std::accumulate(weight.begin(), weight.end(), 0.0);
  for (double& w : weight) w /= weight_total;

  // Enumerate whole sizes while the budget covers them at their kernel share.
  std::vector<double> remaining = weight;
  double samples_left = static_cast<double>(budget);
  int full_sizes = 0;
  for (int s = 1; s <= num_sizes; ++s) {
    double count = Binomial(n, s);
    if (s <= num_paired) count *= 2.0;
    if (samples_left * remaining[static_cast<std::size_t>(s - 1)] / count < 1.0 - 1e-8) break;
    ++full_sizes;
    samples_left -= count;
    if (remaining[static_cast<std::size_t>(s - 1)] < 1.0) {
      const double scale = 1.0 - remaining[static_cast<std::size_t>(s - 1)];
      for (double& w : remaining) w /= scale;
    }
    double w = weight[static_cast<std::size_t>(s - 1)] / Binomial(n, s);
    const bool paired = s <= num_paired;
    if (paired) w /= 2.0;
    ForEachSubset(n, s, [&](const Coalition& c) {
      out.masks.push_back({c, w});
      if (paired) out.masks.push_back({Complement(c), w});
    });
  }
  const std::size_t fixed = out.masks.size();

  if (full_sizes < num_sizes && samples_left >= 1.0) {
    std::vector<double> draw_weight(weight.begin() + full_sizes, weight.end());
    for (int s = full_sizes + 1; s <= num_paired; ++s) {
      draw_weight[static_cast<std::size_t>(s - full_sizes - 1)] /= 2.0;
    }
    std::vector<double> cdf(draw_weight.size());
    std::partial_sum(draw_weight.begin(), draw_weight.end(), cdf.begin());
    for (double& c : cdf) c /= cdf.back();

    Rng rng(seed);
    std::map<Coalition, std::size_t> seen;
    auto samples = static_cast<std::size_t>(samples_left);
    auto add = [&](Coalition c) {
      auto [it, inserted] = seen.try_emplace(c, out.masks.size());
      if (inserted) {
        out.masks.push_back({std::move(c), 1.0});
        --samples;
      } else {
        out.masks[it->second].kernel_weight += 1.0;
      }
    };
    std::vector<int> positions(static_cast<std::size_t>(n));
    const std::size_t max_draws = 8 * budget + 64;
    for (std::size_t draw = 0; samples > 0 && draw < max_draws; ++draw) {
      const double u = rng.Uniform();
      const auto slot = static_cast<int>(
          std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      const int size = full_sizes + 1 + std::min(slot, static_cast<int>(cdf.size()) - 1);
      std::iota(positions.begin(), positions.end(), 0);
      Coalition c(static_cast<std::size_t>(n), false);
      for (int i = 0; i < size; ++i) {
        const auto j = static_cast<std::size_t>(i) +
                       rng.Below(static_cast<std::uint64_t>(n - i));
        std::swap(positions[static_cast<std::size_t>(i)], positions[j]);
        c[static_cast<std::size_t>(positions[static_cast<std::size_t>(i)])] = true;
      }
      Coalition complement = Complement(c);
      add(std::move(c));
      if (samples > 0 && size <= num_paired) add(std::move(complement));
    }
    // Sampled coalitions share the kernel mass left over after enumeration.
    double left = 0.0;
    for (int s = full_sizes + 1; s <= num_sizes; ++s) left += weight[static_cast<std::size_t>(s - 1)];
    double sampled = 0.0;
    for (std::size_t i = fixed; i < out.masks.size(); ++i) sampled += out.masks[i].kernel_weight;
    for (std::size_t i = fixed; i < out.masks.size(); ++i) {
      out.masks[i].kernel_weight *= left / sampled;
    }
  }
  return out;
}

KernelShapResult SolveKernelShap(const std::vector<CoalitionMask>& masks,
                                 const Eigen::VectorXd& values, double empty_value,
                                 double full_value) {
  if (masks.empty()) throw ContractError("SolveKernelShap: no coalitions");
  const auto n = static_cast<Eigen::Index>(masks.size());
  const auto length = static_cast<Eigen::Index>(masks.front().retained.size());
  const double delta = full_value - empty_value;
  KernelShapResult out;
  out.values.resize(length);
  if (length == 1) {
    out.values(0) = delta;
    return out;
  }
  // Substitute phi_last = delta - sum(phi_j) and solve for the other L - 1.
  const Eigen::Index free = length - 1;
  Eigen::MatrixXd design(n, free);
  Eigen::VectorXd target(n);
  Eigen::VectorXd w(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Coalition& c = masks[static_cast<std::size_t>(r)].retained;
    const double last = c[static_cast<std::size_t>(free)] ? 1.0 : 0.0;
    for (Eigen::Index j = 0; j < free; ++j) {
      design(r, j) = (c[static_cast<std::size_t>(j)] ? 1.0 : 0.0) - last;
    }
    target(r) = values(r) - empty_value - last * delta;
    w(r) = masks[static_cast<std::size_t>(r)].kernel_weight;
  }
  const Eigen::MatrixXd normal = design.transpose() * w.asDiagonal() * design;
  const Eigen::VectorXd rhs = design.transpose() * (w.asDiagonal() * target);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(normal);
  Eigen::VectorXd phi;
  if (qr.rank() == free) {
    phi = qr.solve(rhs);
  } else {
    out.regularized = true;
    phi = (normal + 1e-8 * Eigen::MatrixXd::Identity(free, free)).ldlt().solve(rhs);
  }
  out.values.head(free) = phi;
  out.values(free) = delta - phi.sum();
  return out;
}

KernelShapResult KernelShap(const ValueFn& value, int length, std::size_t budget,
                            std::uint64_t seed) {
  if (length < 1) throw ContractError("KernelShap: document must have at least one token");
  const auto n = static_cast<std::size_t>(length);
  const double empty_value = value(Coalition(n, false));
  const double full_value = value(Coalition(n, true));
  if (length == 1) {
    KernelShapResult out;
    out.values = Eigen::VectorXd::Constant(1, full_value - empty_value);
    out.exhaustive = true;
    out.evaluations = 2;
    return out;
  }
  if (budget < n + 2 && !(length < 62 && (std::uint64_t{1} << length) - 2 <= budget)) {
    throw ContractError("KernelShap: coalition budget must be at least L + 2");
  }
  const CoalitionSample sample = SampleCoalitions(length, budget, seed);
  Eigen::VectorXd values(static_cast<Eigen::Index>(sample.masks.size()));
  for (std::size_t i = 0; i < sample.masks.size(); ++i) {
    values(static_cast<Eigen::Index>(i)) = value(sample.masks[i].retained);
  }
  KernelShapResult out = SolveKernelShap(sample.masks, values, empty_value, full_value);
  out.exhaustive = sample.exhaustive;
  out.evaluations = sample.masks.size() + 2;
  return out;
}

Eigen::VectorXd ExactShapley(const ValueFn& value, int length) {
  if (length < 1 || length > kMaxExactShapleyLength) {
    throw ContractError("ExactShapley: length " + std::to_string(length) +
                        " outside [1, " + std::to_string(kMaxExactShapleyLength) + "]");
  }
  const std::size_t n = static_cast<std::size_t>(length);
  const std::size_t subsets = std::size_t{1} << n;
  std::vector<double> v(subsets);
  Coalition c(n);
  for (std::size_t bits = 0; bits < subsets; ++bits) {
    for (std::size_t i = 0; i < n; ++i) c[i] = (bits >> i) & 1U;
    v[bits] = value(c);
  }
  // |S|! (L - |S| - 1)! / L! = 1 / (L * C(L - 1, |S|)).
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) {
    weight[s] = 1.0 / (static_cast<double>(n) *
                       Binomial(length - 1, static_cast<int>(s)));
  }
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(length);
  for (std::size_t bits = 0; bits < subsets; ++bits) {
    const auto size = static_cast<std::size_t>(std::popcount(bits));
    if (size == n) continue;
    for (std::size_t i = 0; i < n; ++i) {
      if ((bits >> i) & 1U) continue;
      phi(static_cast<Eigen::Index>(i)) +=
          weight[size] * (v[bits | (std::size_t{1} << i)] - v[bits]);
    }
  }
  return phi;
}

}  // namespace randcheck::attribution
