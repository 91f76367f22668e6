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

// Token attribution methods: vanilla saliency, SmoothGrad, integrated
// gradients, KernelSHAP and uniform random scores, plus the reductions that
// turn per-dimension gradient vectors into one score per token.

#ifndef RANDCHECK_ATTRIBUTIONS_H_
#define RANDCHECK_ATTRIBUTIONS_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "randcheck/model.h"
#include "randcheck/shapley.h"
#include "randcheck/text.h"

namespace randcheck::attribution {

using autodiff::RowMatrixXd;
using autodiff::TensorXd;
using model::ModelCheckpoint;
using text::TokenizedDoc;

enum class Method { kVanilla, kSmoothGrad, kIntegratedGradients, kKernelShap, kRandom };
enum class Reduction { kNone, kL2, kInputDotGrad };
// What the explained score is: the raw logit of the target class or its
// softmax probability.
enum class Target { kLogit, kProbability };

std::string_view Tag(Method method);  // VN, SG, IG, SHP, RND
Method ParseMethod(std::string_view tag);
std::string_view Name(Reduction reduction);
Reduction ParseReduction(std::string_view name);
std::string_view Name(Target target);
Target ParseTarget(std::string_view name);
bool IsGradientMethod(Method method);

struct AttributionOutput {
  std::string doc_id;
  Method method = Method::kVanilla;
  std::string variant;
  int target_class = 0;
  // [L, D] for gradient methods; absent for SHP and RND.
  std::optional<RowMatrixXd> vector_scores;
  Eigen::VectorXd scalar_scores;
  Reduction reduction = Reduction::kNone;
  bool solver_regularized = false;
  nlohmann::json params = nlohmann::json::object();

  std::size_t length() const { return static_cast<std::size_t>(scalar_scores.size()); }
};

nlohmann::json ToJson(const AttributionOutput& out);
AttributionOutput AttributionFromJson(const nlohmann::json& j);

// Differentiable scalar score of [L, D] input embeddings.
using ScoreFn = std::function<TensorXd(const TensorXd&)>;

// d score / d embeddings at `at`.
RowMatrixXd Gradient(const ScoreFn& score, const RowMatrixXd& at);

RowMatrixXd VanillaGradient(const ScoreFn& score, const RowMatrixXd& inputs);

// Mean gradient over n_iter copies of the inputs with i.i.d. N(0, sigma^2)
// noise. The running mean is exact when every gradient is identical.
RowMatrixXd SmoothGradient(const ScoreFn& score, const RowMatrixXd& inputs,
                           double sigma, int n_iter, std::uint64_t noise_seed);

// (x - b) elementwise times the mean gradient at the midpoints
// b + ((k - 1/2) / steps) (x - b), k = 1..steps.
RowMatrixXd IntegratedGradient(const ScoreFn& score, const RowMatrixXd& inputs,
                               const RowMatrixXd& baseline, int steps);

ScoreFn TargetScore(const ModelCheckpoint& ckpt, int target_class,
                    Target target = Target::kLogit);

// The UNK embedding repeated `length` times.
RowMatrixXd UnkBaseline(const ModelCheckpoint& ckpt, std::size_t length);

// v(S): target score with tokens outside S replaced by UNK.
ValueFn TokenValue(const ModelCheckpoint& ckpt, const TokenizedDoc& doc,
                   int target_class, Target target = Target::kLogit);

// Gradient methods leave scalar_scores empty until a reduction is applied.
// All explain the model's predicted class.
AttributionOutput vanilla_saliency(const ModelCheckpoint& ckpt, const TokenizedDoc& doc,
                                   Target target = Target::kLogit);
AttributionOutput smoothgrad(const ModelCheckpoint& ckpt, const TokenizedDoc& doc,
                             double sigma, int n_iter, std::uint64_t noise_seed,
                             Target target = Target::kLogit);
AttributionOutput integrated_gradients(const ModelCheckpoint& ckpt,
                                       const TokenizedDoc& doc, int steps = 50,
                                       Target target = Target::kLogit);
AttributionOutput kernel_shap(const ModelCheckpoint& ckpt, const TokenizedDoc& doc,
                              std::size_t n_coalitions, std::uint64_t seed,
                              Target target = Target::kLogit);
Eigen::VectorXd exact_shapley(const ModelCheckpoint& ckpt, const TokenizedDoc& doc,
                              Target target = Target::kLogit);
AttributionOutput random_attribution(const TokenizedDoc& doc, std::uint64_t seed);

// l2: per-token Euclidean norm. input_dot_grad: per-token sum of
// input * gradient.
Eigen::VectorXd reduce(const RowMatrixXd& vector_scores, Reduction reduction,
                       const RowMatrixXd& input_embeddings);

// Applies a reduction to a gradient-method output. IG vectors already carry
// the (x - b) factor, so input_dot_grad reduces them to a plain row sum.
AttributionOutput Reduced(AttributionOutput raw, Reduction reduction,
                          const RowMatrixXd& input_embeddings);

struct SigmaSelection {
  double sigma = 0.0;
  // Mean infidelity per grid entry, in grid order.
  std::vector<double> mean_infidelity;
};

struct SmoothGradContext {
  int n_iter = 10;
  Reduction reduction = Reduction::kL2;
  Target target = Target::kLogit;
  std::function<std::uint64_t(const TokenizedDoc&)> noise_seed;
};

// Grid entry with the lowest mean infidelity over `docs`; ties go to the
// smaller sigma.
SigmaSelection select_sg_sigma(const ModelCheckpoint& ckpt,
                               std::span<const TokenizedDoc> docs,
                               std::span<const double> sigma_grid,
                               const SmoothGradContext& ctx);

}  // namespace randcheck::attribution

#endif  // RANDCHECK_ATTRIBUTIONS_H_
