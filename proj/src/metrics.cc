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

#include "randcheck/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "randcheck/errors.h"

namespace randcheck::metrics {

std::size_t TopKSize(std::size_t length, double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    throw ContractError("top_k_set: k_percent must lie in (0, 100]");
  }
  // The tolerance keeps products such as 0.1 * 30 from rounding up.
  const double exact = k_percent * static_cast<double>(length) / 100.0;
  const auto m = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  return std::clamp<std::size_t>(m, length == 0 ? 0 : 1, length);
}

std::vector<std::size_t> DropOrder(const Eigen::VectorXd& scores) {
  std::vector<std::size_t> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
  });
  return order;
}

std::vector<std::size_t> top_k_set(const Eigen::VectorXd& scores, double k_percent) {
  std::vector<std::size_t> order = DropOrder(scores);
  order.resize(TopKSize(order.size(), k_percent));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> top_k_set(const AttributionOutput& att, double k_percent) {
  return top_k_set(att.scalar_scores, k_percent);
}

JaccardResult jaccard_at_k(const AttributionOutput& a, const AttributionOutput& b,
                           double k_percent) {
  if (a.doc_id != b.doc_id || a.length() != b.length()) {
    throw ContractError("jaccard_at_k: attributions describe different documents ('" +
                        a.doc_id + "' vs '" + b.doc_id + "')");
  }
  std::vector<std::size_t> sa = top_k_set(a, k_percent);
  std::vector<std::size_t> sb = top_k_set(b, k_percent);
  JaccardResult r;
  r.doc_id = a.doc_id;
  r.source_a = a.variant + "/" + std::string(attribution::Tag(a.method));
  r.source_b = b.variant + "/" + std::string(attribution::Tag(b.method));
  r.k_percent = k_percent;
  r.size_a = sa.size();
  r.size_b = sb.size();
  r.value = Jaccard(std::move(sa), std::move(sb));
  return r;
}

InfidelityResult Infidelity(const Predictor& predict, const TokenizedDoc& doc,
                            const Eigen::VectorXd& scores) {
  if (static_cast<std::size_t>(scores.size()) != doc.length()) {
    throw ContractError("infidelity: " + std::to_string(scores.size()) +
                        " scores for a document of length " +
                        std::to_string(doc.length()));
  }
  if (doc.ids.empty()) throw ContractError("infidelity: empty document");
  InfidelityResult r;
  r.doc_id = doc.doc_id;
  const int original = predict(doc.ids);
  std::vector<int> ids = doc.ids;
  const std::vector<std::size_t> order = DropOrder(scores);
  const double length = static_cast<double>(ids.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    ids[order[k]] = text::kUnkId;
    if (predict(ids) != original) {
      r.dropped = k + 1;
      r.dropped_fraction = 100.0 * static_cast<double>(r.dropped) / length;
      r.flipped = true;
      return r;
    }
  }
  r.dropped = order.size();
  r.dropped_fraction = 100.0;
  r.flipped = false;
  return r;
}

InfidelityResult infidelity(const ModelCheckpoint& ckpt, const TokenizedDoc& doc,
                            const AttributionOutput& att) {
  if (att.scalar_scores.size() == 0 && att.length() != doc.length()) {
    throw ContractError("infidelity: attribution has no scalar scores; apply a reduction");
  }
  InfidelityResult r = Infidelity(
      [&ckpt](std::span<const int> ids) { return model::predict(ckpt, ids); }, doc,
      att.scalar_scores);
  r.method = std::string(attribution::Tag(att.method));
  r.variant = att.variant;
  return r;
}

double mean_infidelity(std::span<const InfidelityResult> results) {
  if (results.empty()) throw ContractError("mean_infidelity: no results");
  double sum = 0.0;
  for (const InfidelityResult& r : results) sum += r.dropped_fraction;
  return sum / static_cast<double>(results.size());
}

InfidelitySummary Summarize(std::span<const InfidelityResult> results) {
  InfidelitySummary s;
  s.mean = mean_infidelity(results);
  s.count = results.size();
  double flipped_sum = 0.0;
  for (const InfidelityResult& r : results) {
    if (r.flipped) {
      flipped_sum += r.dropped_fraction;
    } else {
      ++s.censored;
    }
  }
  const std::size_t flipped = s.count - s.censored;
  s.mean_flipped_only = flipped == 0 ? std::numeric_limits<double>::quiet_NaN()
                                     : flipped_sum / static_cast<double>(flipped);
  return s;
}

Overlap prediction_overlap(const ModelCheckpoint& a, const ModelCheckpoint& b,
                           std::span<const TokenizedDoc> docs) {
  Overlap o;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (model::predict(a, docs[i]) == model::predict(b, docs[i])) o.agreeing.push_back(i);
  }
  o.fraction = docs.empty() ? 0.0
                            : static_cast<double>(o.agreeing.size()) /
                                  static_cast<double>(docs.size());
  return o;
}

double accuracy(const ModelCheckpoint& ckpt, std::span<const TokenizedDoc> docs) {
  if (docs.empty()) return 0.0;
  std::size_t correct = 0;
  for (const TokenizedDoc& d : docs) correct += model::predict(ckpt, d) == d.label;
  return static_cast<double>(correct) / static_cast<double>(docs.size());
}

}  // namespace randcheck::metrics
