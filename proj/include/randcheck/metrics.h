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

// Infidelity (tokens dropped until the prediction flips), Jaccard@K%,
// accuracy and prediction overlap.

#ifndef RANDCHECK_METRICS_H_
#define RANDCHECK_METRICS_H_

#include <algorithm>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "randcheck/attributions.h"
#include "randcheck/model.h"
#include "randcheck/text.h"

namespace randcheck::metrics {

using attribution::AttributionOutput;
using model::ModelCheckpoint;
using text::TokenizedDoc;

// ceil(k_percent / 100 * L), clamped to [1, L].
std::size_t TopKSize(std::size_t length, double k_percent);

// Positions of the TopKSize highest scores, ties toward the lower position,
// returned in ascending position order.
std::vector<std::size_t> top_k_set(const Eigen::VectorXd& scores, double k_percent);
std::vector<std::size_t> top_k_set(const AttributionOutput& att, double k_percent);

// |a intersect b| / |a union b| over sets of any ordered element type.
// Two empty sets count as identical.
template <typename T>
double Jaccard(std::vector<T> a, std::vector<T> b) {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  std::size_t common = 0;
  for (std::size_t i = 0, j = 0; i < a.size() && j < b.size();) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  const std::size_t unite = a.size() + b.size() - common;
  return unite == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(unite);
}

struct JaccardResult {
  std::string doc_id;
  std::string source_a;
  std::string source_b;
  double k_percent = 0.0;
  double value = 0.0;
  std::size_t size_a = 0;
  std::size_t size_b = 0;
};

// Both attributions must describe the same document.
JaccardResult jaccard_at_k(const AttributionOutput& a, const AttributionOutput& b,
                           double k_percent);

// Positions in decreasing score order, ties toward the lower position.
std::vector<std::size_t> DropOrder(const Eigen::VectorXd& scores);

struct InfidelityResult {
  std::string doc_id;
  std::string method;
  std::string variant;
  // 100 * dropped / L.
  double dropped_fraction = 100.0;
  std::size_t dropped = 0;
  // False only when every token was dropped without a change.
  bool flipped = false;
};

using Predictor = std::function<int(std::span<const int>)>;

// Replaces tokens with UNK one at a time in DropOrder and re-predicts after
// each replacement. No flip after all L drops gives 100 with flipped=false.
InfidelityResult Infidelity(const Predictor& predict, const TokenizedDoc& doc,
                            const Eigen::VectorXd& scores);

InfidelityResult infidelity(const ModelCheckpoint& ckpt, const TokenizedDoc& doc,
                            const AttributionOutput& att);

// Headline mean counts censored documents at 100.
double mean_infidelity(std::span<const InfidelityResult> results);

struct InfidelitySummary {
  double mean = 0.0;
  // NaN when every document is censored.
  double mean_flipped_only = 0.0;
  std::size_t censored = 0;
  std::size_t count = 0;
};

InfidelitySummary Summarize(std::span<const InfidelityResult> results);

struct Overlap {
  double fraction = 0.0;
  // Indices into the evaluated documents where both models agree.
  std::vector<std::size_t> agreeing;
};

Overlap prediction_overlap(const ModelCheckpoint& a, const ModelCheckpoint& b,
                           std::span<const TokenizedDoc> docs);

double accuracy(const ModelCheckpoint& ckpt, std::span<const TokenizedDoc> docs);

}  // namespace randcheck::metrics

#endif  // RANDCHECK_METRICS_H_
