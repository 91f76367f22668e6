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

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include "json.hpp"

#include "randcheck/attributions.h"
#include "randcheck/errors.h"
#include "randcheck/metrics.h"
#include "randcheck/model.h"
#include "randcheck/random.h"
#include "test_util.h"

namespace randcheck::metrics {
namespace {

Eigen::VectorXd Vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

text::TokenizedDoc Doc(std::vector<int> ids, const std::string& id = "d") {
  text::TokenizedDoc d;
  d.doc_id = id;
  d.ids = std::move(ids);
  d.tokens.assign(d.ids.size(), "t");
  return d;
}

TEST(TopKTest, SizesFollowCeilingRule) {
  for (std::size_t length = 1; length <= 200; ++length) {
    for (double k : {10.0, 25.0, 50.0, 100.0}) {
      const std::size_t expected = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(k * static_cast<double>(length) / 100.0 - 1e-9)));
      EXPECT_EQ(TopKSize(length, k), std::min(expected, length)) << length << " " << k;
    }
  }
  EXPECT_EQ(TopKSize(20, 25.0), 5u);
  EXPECT_EQ(TopKSize(21, 25.0), 6u);
  EXPECT_EQ(TopKSize(3, 10.0), 1u);
  EXPECT_THROW(TopKSize(10, 0.0), ContractError);
  EXPECT_THROW(TopKSize(10, 101.0), ContractError);
}

TEST(TopKTest, TiesGoToLowerPosition) {
  EXPECT_EQ(top_k_set(Vec({1.0, 3.0, 3.0, 3.0, 0.0}), 40.0), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(top_k_set(Vec({0.0, 0.0, 0.0, 0.0}), 50.0), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(DropOrder(Vec({2.0, 5.0, 2.0, 7.0})), (std::vector<std::size_t>{3, 1, 0, 2}));
}

TEST(JaccardTest, WorkedExamplesFromFixtures) {
  std::ifstream in(std::string(RANDCHECK_FIXTURES) + "/jaccard_examples.json");
  ASSERT_TRUE(in) << "missing fixture";
  const nlohmann::json j = nlohmann::json::parse(in);
  ASSERT_EQ(j["examples"].size(), 3u);
  for (const auto& ex : j["examples"]) {
    const auto a = ex["a"].get<std::vector<std::string>>();
    const auto b = ex["b"].get<std::vector<std::string>>();
    EXPECT_EQ(100.0 * Jaccard(a, b), ex["jaccard_percent"].get<double>()) << ex["name"];
  }
}

TEST(JaccardTest, BasicProperties) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> a, b;
    for (int i = 0; i < 10; ++i) {
      if (rng.Uniform() < 0.4) a.push_back(i);
      if (rng.Uniform() < 0.4) b.push_back(i);
    }
    const double ab = Jaccard(a, b);
    EXPECT_EQ(ab, Jaccard(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_EQ(Jaccard(a, a), 1.0);
  }
  EXPECT_EQ(Jaccard(std::vector<int>{}, std::vector<int>{}), 1.0);
  EXPECT_EQ(Jaccard(std::vector<int>{1}, std::vector<int>{2}), 0.0);
}

attribution::AttributionOutput Scored(const std::string& doc_id, Eigen::VectorXd scores) {
  attribution::AttributionOutput a;
  a.doc_id = doc_id;
  a.method = attribution::Method::kKernelShap;
  a.scalar_scores = std::move(scores);
  return a;
}

// Top-k sets depend only on the ranking, so strictly increasing maps leave
// Jaccard@K unchanged.
TEST(JaccardTest, InvariantUnderMonotoneTransforms) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd s(17), t(17);
    for (Eigen::Index i = 0; i < 17; ++i) {
      s(i) = rng.Normal();
      t(i) = rng.Normal();
    }
    for (double k : {10.0, 25.0, 50.0}) {
      const double base = jaccard_at_k(Scored("x", s), Scored("x", t), k).value;
      const Eigen::VectorXd affine = (2.0 * s.array() + 1.0).matrix();
      const Eigen::VectorXd expo = s.array().exp().matrix();
      EXPECT_EQ(jaccard_at_k(Scored("x", affine), Scored("x", t), k).value, base);
      EXPECT_EQ(jaccard_at_k(Scored("x", expo), Scored("x", t), k).value, base);
    }
  }
}

TEST(JaccardTest, RejectsDifferentDocuments) {
  EXPECT_THROW(jaccard_at_k(Scored("a", Vec({1, 2})), Scored("b", Vec({1, 2})), 50.0),
               ContractError);
}

TEST(JaccardTest, ReportsSetSizes) {
  const JaccardResult r = jaccard_at_k(Scored("a", Vec({4, 3, 2, 1})), Scored("a", Vec({1, 2, 3, 4})), 50.0);
  EXPECT_EQ(r.size_a, 2u);
  EXPECT_EQ(r.size_b, 2u);
  EXPECT_EQ(r.value, 0.0);
}

// The prediction flips exactly when token 7 disappears.
TEST(InfidelityTest, PlantedDecisiveToken) {
  Predictor planted = [](std::span<const int> ids) {
    return std::find(ids.begin(), ids.end(), 7) != ids.end() ? 1 : 0;
  };
  const text::TokenizedDoc doc = Doc({3, 7, 4, 5});
  InfidelityResult best = Infidelity(planted, doc, Vec({0.1, 0.9, 0.2, 0.3}));
  EXPECT_TRUE(best.flipped);
  EXPECT_EQ(best.dropped, 1u);
  EXPECT_DOUBLE_EQ(best.dropped_fraction, 25.0);
  InfidelityResult worst = Infidelity(planted, doc, Vec({0.9, 0.0, 0.8, 0.7}));
  EXPECT_EQ(worst.dropped, 4u);
  EXPECT_DOUBLE_EQ(worst.dropped_fraction, 100.0);
  EXPECT_TRUE(worst.flipped);
}

TEST(InfidelityTest, CensoredWhenNothingFlips) {
  Predictor constant = [](std::span<const int>) { return 0; };
  const InfidelityResult r = Infidelity(constant, Doc({3, 4, 5}), Vec({1, 2, 3}));
  EXPECT_FALSE(r.flipped);
  EXPECT_EQ(r.dropped_fraction, 100.0);
}

TEST(InfidelityTest, MeanAndSummary) {
  std::vector<InfidelityResult> rs(2);
  rs[0].dropped_fraction = 50.0;
  rs[0].flipped = true;
  rs[1].dropped_fraction = 100.0;
  rs[1].flipped = false;
  EXPECT_DOUBLE_EQ(mean_infidelity(rs), 75.0);
  const InfidelitySummary s = Summarize(rs);
  EXPECT_DOUBLE_EQ(s.mean, 75.0);
  EXPECT_DOUBLE_EQ(s.mean_flipped_only, 50.0);
  EXPECT_EQ(s.censored, 1u);
  EXPECT_EQ(s.count, 2u);
  rs.erase(rs.begin());
  EXPECT_TRUE(std::isnan(Summarize(rs).mean_flipped_only));
  EXPECT_THROW(mean_infidelity(std::vector<InfidelityResult>{}), ContractError);
}

TEST(InfidelityTest, ModelPathMatchesPredictorPath) {
  const model::ModelCheckpoint ckpt = model::init_params(
      testing::SmallModel(30, model::EncoderType::kSelfAttention), 1, 2);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> ids(8);
    for (int& id : ids) id = 2 + static_cast<int>(rng.Below(28));
    const text::TokenizedDoc doc = Doc(ids);
    const attribution::AttributionOutput att = attribution::random_attribution(doc, trial);
    const InfidelityResult a = infidelity(ckpt, doc, att);
    const InfidelityResult b = Infidelity(
        [&](std::span<const int> x) { return model::predict(ckpt, x); }, doc, att.scalar_scores);
    EXPECT_EQ(a.dropped, b.dropped);
    EXPECT_EQ(a.flipped, b.flipped);
  }
}

TEST(OverlapTest, IdenticalModelsAgreeEverywhere) {
  const model::ModelCheckpoint a =
      model::init_params(testing::SmallModel(30, model::EncoderType::kNone), 1, 2);
  std::vector<text::TokenizedDoc> docs{Doc({3, 4}), Doc({5, 6, 7}), Doc({9})};
  const Overlap o = prediction_overlap(a, a, docs);
  EXPECT_EQ(o.fraction, 1.0);
  EXPECT_EQ(o.agreeing, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(accuracy(a, std::vector<text::TokenizedDoc>{}), 0.0);
}

}  // namespace
}  // namespace randcheck::metrics
