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

#include "randcheck/attributions.h"

#include <cmath>
#include <utility>

#include "randcheck/errors.h"
#include "randcheck/metrics.h"
#include "randcheck/ops.h"
#include "randcheck/random.h"

namespace randcheck::attribution {

using nlohmann::json;

namespace {

constexpr Method kMethods[] = {Method::kVanilla, Method::kSmoothGrad,
                               Method::kIntegratedGradients, Method::kKernelShap,
                               Method::kRandom};

std::string MethodName(Method m) {
  switch (m) {
    case Method::kVanilla:
      return "vanilla";
    case Method::kSmoothGrad:
      return "smoothgrad";
    case Method::kIntegratedGradients:
      return "integrated_gradients";
    case Method::kKernelShap:
      return "kernel_shap";
    case Method::kRandom:
      return "random";
  }
  return "?";
}

json MatrixToJson(const RowMatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

RowMatrixXd MatrixFromJson(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
  RowMatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw ContractError("attribution: ragged vector_scores");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

int PredictedClass(const ModelCheckpoint& ckpt, const TokenizedDoc& doc) {
  if (doc.ids.empty()) throw ContractError("attribution: empty document");
  return model::predict(ckpt, doc);
}

AttributionOutput Base(const ModelCheckpoint& ckpt, const TokenizedDoc& doc, Method m,
                       int target_class, Target target) {
  AttributionOutput out;
  out.doc_id = doc.doc_id;
  out.method = m;
  out.variant = std::string(model::Name(ckpt.variant));
  out.target_class = target_class;
  out.params["target"] = std::string(Name(target));
  return out;
}

}  // namespace

std::string_view Tag(Method method) {
  switch (method) {
    case Method::kVanilla:
      return "VN";
    case Method::kSmoothGrad:
      return "SG";
    case Method::kIntegratedGradients:
      return "IG";
    case Method::kKernelShap:
      return "SHP";
    case Method::kRandom:
      return "RND";
  }
  return "?";
}

Method ParseMethod(std::string_view tag) {
  for (Method m : kMethods) {
    if (Tag(m) == tag || MethodName(m) == tag) return m;
  }
  throw ContractError("unknown attribution method '" + std::string(tag) + "'");
}

std::string_view Name(Reduction reduction) {
  switch (reduction) {
    case Reduction::kNone:
      return "none";
    case Reduction::kL2:
      return "l2";
    case Reduction::kInputDotGrad:
      return "input_dot_grad";
  }
  return "?";
}

Reduction ParseReduction(std::string_view name) {
  for (Reduction r : {Reduction::kNone, Reduction::kL2, Reduction::kInputDotGrad}) {
    if (Name(r) == name) return r;
  }
  throw ContractError("unknown reduction '" + std::string(name) + "'");
}

std::string_view Name(Target target) {
  return target == Target::kLogit ? "logit" : "probability";
}

Target ParseTarget(std::string_view name) {
  if (name == "logit") return Target::kLogit;
  if (name == "probability") return Target::kProbability;
  throw ContractError("unknown target '" + std::string(name) + "'");
}

bool IsGradientMethod(Method method) {
  return method == Method::kVanilla || method == Method::kSmoothGrad ||
         method == Method::kIntegratedGradients;
}

json ToJson(const AttributionOutput& out) {
  json j;
  j["doc_id"] = out.doc_id;
  j["method"] = std::string(Tag(out.method));
  j["variant"] = out.variant;
  j["target_class"] = out.target_class;
  j["vector_scores"] = out.vector_scores ? MatrixToJson(*out.vector_scores) : json(nullptr);
  j["scalar_scores"] = std::vector<double>(out.scalar_scores.data(),
                                           out.scalar_scores.data() + out.scalar_scores.size());
  j["reduction"] = std::string(Name(out.reduction));
  j["solver_regularized"] = out.solver_regularized;
  j["params"] = out.params;
  return j;
}

AttributionOutput AttributionFromJson(const json& j) {
  AttributionOutput out;
  out.doc_id = j.at("doc_id").get<std::string>();
  out.method = ParseMethod(j.at("method").get<std::string>());
  out.variant = j.at("variant").get<std::string>();
  out.target_class = j.at("target_class").get<int>();
  if (const json& v = j.at("vector_scores"); !v.is_null()) out.vector_scores = MatrixFromJson(v);
  const auto scores = j.at("scalar_scores").get<std::vector<double>>();
  out.scalar_scores = Eigen::Map<const Eigen::VectorXd>(
      scores.data(), static_cast<Eigen::Index>(scores.size()));
  out.reduction = ParseReduction(j.at("reduction").get<std::string>());
  out.solver_regularized = j.value("solver_regularized", false);
  out.params = j.value("params", json::object());
  return out;
}

RowMatrixXd Gradient(const ScoreFn& score, const RowMatrixXd& at) {
  autodiff::TapeXd tape;
  autodiff::TapeXd::Scope scope(tape);
  TensorXd leaf = TensorXd::FromMatrix(at, true);
  TensorXd out = score(leaf);
  if (!out.shape().empty()) {
    throw ContractError("attribution: score must be a scalar, got shape " +
                        autodiff::ShapeString(out.shape()));
  }
  if (!out.requires_grad()) return RowMatrixXd::Zero(at.rows(), at.cols());
  tape.Backward(out);
  return leaf.has_grad() ? leaf.grad() : RowMatrixXd::Zero(at.rows(), at.cols());
}

RowMatrixXd VanillaGradient(const ScoreFn& score, const RowMatrixXd& inputs) {
  return Gradient(score, inputs);
}

RowMatrixXd SmoothGradient(const ScoreFn& score, const RowMatrixXd& inputs, double sigma,
                           int n_iter, std::uint64_t noise_seed) {
  if (n_iter < 1) throw ContractError("smoothgrad: n_iter must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw ContractError("smoothgrad: sigma must be finite and >= 0");
  }
  Rng rng(noise_seed);
  RowMatrixXd mean = RowMatrixXd::Zero(inputs.rows(), inputs.cols());
  RowMatrixXd noisy(inputs.rows(), inputs.cols());
  for (int k = 0; k < n_iter; ++k) {
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
      for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
        noisy(r, c) = inputs(r, c) + sigma * rng.Normal();
      }
    }
    const RowMatrixXd g = Gradient(score, noisy);
    mean += (g - mean) / static_cast<double>(k + 1);
  }
  return mean;
}

RowMatrixXd IntegratedGradient(const ScoreFn& score, const RowMatrixXd& inputs,
                               const RowMatrixXd& baseline, int steps) {
  if (steps < 1) throw ContractError("integrated_gradients: steps must be >= 1");
  if (baseline.rows() != inputs.rows() || baseline.cols() != inputs.cols()) {
    throw ContractError("integrated_gradients: baseline shape differs from inputs");
  }
  const RowMatrixXd delta = inputs - baseline;
  RowMatrixXd total = RowMatrixXd::Zero(inputs.rows(), inputs.cols());
  for (int k = 1; k <= steps; ++k) {
    const double alpha = (static_cast<double>(k) - 0.5) / static_cast<double>(steps);
    total += Gradient(score, baseline + alpha * delta);
  }
  return delta.cwiseProduct(total / static_cast<double>(steps));
}

ScoreFn TargetScore(const ModelCheckpoint& ckpt, int target_class, Target target) {
  if (target_class < 0 || target_class >= ckpt.config.classes) {
    throw ContractError("attribution: target class " + std::to_string(target_class) +
                        " out of range");
  }
  return [&ckpt, target_class, target](const TensorXd& embeddings) {
    TensorXd logits = model::LogitsFromEmbeddings(ckpt, embeddings);
    if (target == Target::kProbability) logits = autodiff::softmax(logits, 0);
    return autodiff::select(logits, target_class);
  };
}

RowMatrixXd UnkBaseline(const ModelCheckpoint& ckpt, std::size_t length) {
  const std::vector<int> ids(length, text::kUnkId);
  return model::Embed(ckpt, ids);
}

ValueFn TokenValue(const ModelCheckpoint& ckpt, const TokenizedDoc& doc, int target_class,
                   Target target) {
  const ScoreFn score = TargetScore(ckpt, target_class, target);
  RowMatrixXd x = model::Embed(ckpt, doc.ids);
  RowMatrixXd unk = UnkBaseline(ckpt, doc.ids.size());
  return [score, x = std::move(x), unk = std::move(unk)](const Coalition& retained) {
    if (static_cast<Eigen::Index>(retained.size()) != x.rows()) {
      throw ContractError("value function: coalition length mismatch");
    }
    RowMatrixXd masked = unk;
    for (std::size_t i = 0; i < retained.size(); ++i) {
      if (retained[i]) masked.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(i));
    }
    return score(TensorXd::FromMatrix(masked)).item();
  };
}

AttributionOutput vanilla_saliency(const ModelCheckpoint& ckpt, const TokenizedDoc& doc,
                                   Target target) {
  const int cls = PredictedClass(ckpt, doc);
  AttributionOutput out = Base(ckpt, doc, Method::kVanilla, cls, target);
  out.vector_scores = VanillaGradient(TargetScore(ckpt, cls, target), model::Embed(ckpt, doc.ids));
  return out;
}

AttributionOutput smoothgrad(const ModelCheckpoint& ckpt, const TokenizedDoc& doc,
                             double sigma, int n_iter, std::uint64_t noise_seed,
                             Target target) {
  const int cls = PredictedClass(ckpt, doc);
  AttributionOutput out = Base(ckpt, doc, Method::kSmoothGrad, cls, target);
  out.vector_scores = SmoothGradient(TargetScore(ckpt, cls, target),
                                     model::Embed(ckpt, doc.ids), sigma, n_iter, noise_seed);
  out.params["sigma"] = sigma;
  out.params["n_iter"] = n_iter;
  out.params["noise_seed"] = noise_seed;
  return out;
}

AttributionOutput integrated_gradients(const ModelCheckpoint& ckpt, const TokenizedDoc& doc,
                                       int steps, Target target) {
  const int cls = PredictedClass(ckpt, doc);
  AttributionOutput out = Base(ckpt, doc, Method::kIntegratedGradients, cls, target);
  out.vector_scores = IntegratedGradient(TargetScore(ckpt, cls, target),
                                         model::Embed(ckpt, doc.ids),
                                         UnkBaseline(ckpt, doc.ids.size()), steps);
  out.params["steps"] = steps;
  out.params["baseline"] = "unk";
  return out;
}

AttributionOutput kernel_shap(const ModelCheckpoint& ckpt, const TokenizedDoc& doc,
                              std::size_t n_coalitions, std::uint64_t seed, Target target) {
  const int cls = PredictedClass(ckpt, doc);
  AttributionOutput out = Base(ckpt, doc, Method::kKernelShap, cls, target);
  const KernelShapResult r = KernelShap(TokenValue(ckpt, doc, cls, target),
                                        static_cast<int>(doc.ids.size()), n_coalitions, seed);
  out.scalar_scores = r.values;
  out.solver_regularized = r.regularized;
  out.params["n_coalitions"] = n_coalitions;
  out.params["seed"] = seed;
  out.params["exhaustive"] = r.exhaustive;
  out.params["evaluations"] = r.evaluations;
  return out;
}

Eigen::VectorXd exact_shapley(const ModelCheckpoint& ckpt, const TokenizedDoc& doc,
                              Target target) {
  const int cls = PredictedClass(ckpt, doc);
  return ExactShapley(TokenValue(ckpt, doc, cls, target), static_cast<int>(doc.ids.size()));
}

AttributionOutput random_attribution(const TokenizedDoc& doc, std::uint64_t seed) {
  if (doc.ids.empty()) throw ContractError("attribution: empty document");
  AttributionOutput out;
  out.doc_id = doc.doc_id;
  out.method = Method::kRandom;
  out.target_class = -1;
  Rng rng(seed);
  out.scalar_scores.resize(static_cast<Eigen::Index>(doc.ids.size()));
  for (Eigen::Index i = 0; i < out.scalar_scores.size(); ++i) out.scalar_scores(i) = rng.Uniform();
  out.params["seed"] = seed;
  return out;
}

Eigen::VectorXd reduce(const RowMatrixXd& vector_scores, Reduction reduction,
                       const RowMatrixXd& input_embeddings) {
  switch (reduction) {
    case Reduction::kL2:
      return vector_scores.rowwise().norm();
    case Reduction::kInputDotGrad:
      if (input_embeddings.rows() != vector_scores.rows() ||
          input_embeddings.cols() != vector_scores.cols()) {
        throw ContractError("reduce: input embeddings do not match the gradient shape");
      }
      return vector_scores.cwiseProduct(input_embeddings).rowwise().sum();
    case Reduction::kNone:
      break;
  }
  throw ContractError("reduce: reduction 'none' yields no scalar scores");
}

AttributionOutput Reduced(AttributionOutput raw, Reduction reduction,
                          const RowMatrixXd& input_embeddings) {
  if (!IsGradientMethod(raw.method) || !raw.vector_scores) {
    throw ContractError("reduce: only gradient-method outputs carry vector scores");
  }
  const RowMatrixXd& v = *raw.vector_scores;
  if (raw.method == Method::kIntegratedGradients && reduction == Reduction::kInputDotGrad) {
    raw.scalar_scores = v.rowwise().sum();
  } else {
    raw.scalar_scores = reduce(v, reduction, input_embeddings);
  }
  raw.reduction = reduction;
  return raw;
}

SigmaSelection select_sg_sigma(const ModelCheckpoint& ckpt, std::span<const TokenizedDoc> docs,
                               std::span<const double> sigma_grid,
                               const SmoothGradContext& ctx) {
  if (sigma_grid.empty()) throw ContractError("select_sg_sigma: empty sigma grid");
  if (docs.empty()) throw ContractError("select_sg_sigma: no documents");
  SigmaSelection best;
  double best_value = 0.0;
  for (std::size_t g = 0; g < sigma_grid.size(); ++g) {
    const double sigma = sigma_grid[g];
    std::vector<metrics::InfidelityResult> results;
    results.reserve(docs.size());
    for (const TokenizedDoc& doc : docs) {
      const std::uint64_t seed = ctx.noise_seed ? ctx.noise_seed(doc) : 0;
      const AttributionOutput att =
          Reduced(smoothgrad(ckpt, doc, sigma, ctx.n_iter, seed, ctx.target), ctx.reduction,
                  model::Embed(ckpt, doc.ids));
      results.push_back(metrics::infidelity(ckpt, doc, att));
    }
    const double value = metrics::mean_infidelity(results);
    best.mean_infidelity.push_back(value);
    const bool better = g == 0 || value < best_value ||
                        (value == best_value && sigma < best.sigma);
    if (better) {
      best_value = value;
      best.sigma = sigma;
    }
  }
  return best;
}

}  // namespace randcheck::attribution
