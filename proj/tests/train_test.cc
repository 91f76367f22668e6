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
#include <vector>

#include <gtest/gtest.h>

#include "randcheck/errors.h"
#include "randcheck/model.h"
#include "randcheck/ops.h"
#include "randcheck/train.h"
#include "test_util.h"

namespace randcheck::model {
namespace {

using randcheck::testing::SmallModel;
using randcheck::testing::SyntheticSplit;
using randcheck::testing::VocabSize;

double Accuracy(const ModelCheckpoint& c, const std::vector<text::TokenizedDoc>& docs) {
  int right = 0;
  for (const auto& d : docs) right += predict(c, d) == d.label;
  return static_cast<double>(right) / static_cast<double>(docs.size());
}

TrainConfig FastTrain() {
  TrainConfig tc;
  tc.learning_rates = {1e-2};
  tc.max_epochs = 8;
  tc.patience = 3;
  tc.seed = 4;
  return tc;
}

// Hand-computed first and second AdamW steps for a single coordinate.
TEST(AdamWTest, MatchesReferenceUpdates) {
  autodiff::TensorXd w = autodiff::TensorXd::Vector(Eigen::RowVector2d(1.0, -2.0), true);
  AdamW::Options opt;
  opt.learning_rate = 0.1;
  opt.weight_decay = 0.5;
  AdamW adam({w}, opt);
  double ref = 1.0, m = 0.0, v = 0.0;
  const std::vector<double> grads{0.3, -0.7};
  for (int t = 1; t <= 2; ++t) {
    const double g = grads[static_cast<std::size_t>(t - 1)];
    w.zero_grad();
    RowMatrixXd gm(1, 2);
    gm << g, 0.0;
    w.AccumulateGrad(gm);
    adam.Step();
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    ref *= 1.0 - 0.1 * 0.5;
    ref -= 0.1 / (1.0 - std::pow(0.9, t)) * m / (std::sqrt(v) / std::sqrt(1.0 - std::pow(0.999, t)) + 1e-8);
    EXPECT_NEAR(w.value()(0, 0), ref, 1e-14);
  }
  // Zero gradient still decays.
  EXPECT_NEAR(w.value()(0, 1), -2.0 * 0.95 * 0.95, 1e-14);
}

TEST(AdamWTest, SkipsParamsWithoutGradient) {
  autodiff::TensorXd w = autodiff::TensorXd::Vector(Eigen::RowVector2d(1.0, 1.0), true);
  AdamW adam({w}, {});
  adam.Step();
  EXPECT_EQ(w.value()(0, 0), 1.0);
}

TEST(TrainTest, ReachesHighAccuracyOnKeywordCorpus) {
  const text::DatasetSplit split = SyntheticSplit(600, 1);
  ModelCheckpoint init =
      init_params(SmallModel(VocabSize(split), EncoderType::kSelfAttention), 2, 3);
  TrainResult r = train(init, split, FastTrain(), Trainable::kAll);
  EXPECT_GE(Accuracy(r.checkpoint, split.test), 0.95);
  EXPECT_EQ(r.log.learning_rate, 1e-2);
  ASSERT_FALSE(r.log.epochs.empty());
  EXPECT_LE(r.log.best_epoch, static_cast<int>(r.log.epochs.size()));
  EXPECT_DOUBLE_EQ(r.log.best_val_acc, Accuracy(r.checkpoint, split.validation));
}

// Without keyword signal the labels are independent of the text.
TEST(TrainTest, UninformativeCorpusStaysNearChance) {
  const text::DatasetSplit split = SyntheticSplit(1000, 8, 12, 24, 2, 0.0);
  ModelCheckpoint init =
      init_params(SmallModel(VocabSize(split), EncoderType::kSelfAttention), 2, 3);
  TrainResult r = train(init, split, FastTrain(), Trainable::kAll);
  // 200 test documents: 0.15 is over four binomial standard deviations.
  EXPECT_NEAR(Accuracy(r.checkpoint, split.test), 0.5, 0.15);
}

TEST(TrainTest, IsDeterministic) {
  const text::DatasetSplit split = SyntheticSplit(200, 2);
  ModelCheckpoint init = init_params(SmallModel(VocabSize(split), EncoderType::kNone), 2, 3);
  TrainResult a = train(init, split, FastTrain(), Trainable::kAll);
  TrainResult b = train(init, split, FastTrain(), Trainable::kAll);
  EXPECT_EQ(a.checkpoint.ContentHash(), b.checkpoint.ContentHash());
  ASSERT_EQ(a.log.epochs.size(), b.log.epochs.size());
  for (std::size_t i = 0; i < a.log.epochs.size(); ++i) {
    EXPECT_EQ(a.log.epochs[i].train_loss, b.log.epochs[i].train_loss);
  }
}

TEST(TrainTest, EarlyStoppingHonoursPatience) {
  const text::DatasetSplit split = SyntheticSplit(200, 3);
  ModelCheckpoint init = init_params(SmallModel(VocabSize(split), EncoderType::kNone), 2, 3);
  TrainConfig tc = FastTrain();
  tc.max_epochs = 30;
  tc.patience = 2;
  TrainResult r = TrainWithLearningRate(init, split, tc, 1e-2, Trainable::kAll);
  const int ran = static_cast<int>(r.log.epochs.size());
  ASSERT_LT(ran, 30) << "expected validation accuracy to saturate";
  EXPECT_EQ(ran, r.log.best_epoch + tc.patience);
  // The best epoch is the first one reaching the maximum.
  double best = 0.0;
  int first = 0;
  for (const EpochRecord& e : r.log.epochs) {
    if (e.val_acc > best) {
      best = e.val_acc;
      first = e.epoch;
    }
  }
  EXPECT_EQ(r.log.best_epoch, first);
}

TEST(TrainTest, HeadOnlyLeavesEncoderUntouched) {
  const text::DatasetSplit split = SyntheticSplit(200, 4);
  ModelCheckpoint init =
      init_params(SmallModel(VocabSize(split), EncoderType::kSelfAttention), 2, 3);
  TrainResult r = train(init, split, FastTrain(), Trainable::kHeadOnly);
  for (const auto& [name, t] : init.params) {
    const bool same = r.checkpoint.at(name).value() == t.value();
    EXPECT_EQ(same, !IsHeadParam(name)) << name;
  }
}

TEST(TrainTest, LearningRateGridKeepsEarliestBest) {
  const text::DatasetSplit split = SyntheticSplit(200, 5);
  ModelCheckpoint init = init_params(SmallModel(VocabSize(split), EncoderType::kNone), 2, 3);
  TrainConfig tc = FastTrain();
  tc.learning_rates = {1e-2, 1e-2};
  TrainResult r = train(init, split, tc, Trainable::kAll);
  ASSERT_EQ(r.log.grid.size(), 2u);
  EXPECT_EQ(r.log.grid[0].second, r.log.grid[1].second);
  EXPECT_EQ(r.log.learning_rate, 1e-2);
}

class VariantsTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    split_ = new text::DatasetSplit(SyntheticSplit(400, 6));
    VariantSeeds seeds{10, 11, 12, 13, 14};
    variants_ = new Variants(make_variants(
        SmallModel(VocabSize(*split_), EncoderType::kSelfAttention), *split_, FastTrain(), seeds));
  }
  static void TearDownTestSuite() {
    delete variants_;
    delete split_;
  }
  static text::DatasetSplit* split_;
  static Variants* variants_;
};
text::DatasetSplit* VariantsTest::split_ = nullptr;
Variants* VariantsTest::variants_ = nullptr;

TEST_F(VariantsTest, EncoderIsSharedAcrossVariants) {
  for (const auto& [name, t] : variants_->pretrain.params) {
    if (IsHeadParam(name)) continue;
    EXPECT_TRUE(variants_->first.at(name).value() == t.value()) << name;
    EXPECT_TRUE(variants_->second.at(name).value() == t.value()) << name;
    EXPECT_TRUE(variants_->rand.at(name).value() == t.value()) << name;
  }
}

TEST_F(VariantsTest, HeadsDifferAndRandHeadIsUntrained) {
  const ModelConfig cfg = variants_->first.config;
  ModelCheckpoint fresh = init_params(cfg, 10, 14, Variant::kRandInit);
  for (const auto& [name, t] : fresh.params) {
    if (!IsHeadParam(name)) continue;
    EXPECT_TRUE(variants_->rand.at(name).value() == t.value()) << name;
  }
  EXPECT_FALSE(variants_->first.at(param::kFc1Weight).value() ==
               variants_->second.at(param::kFc1Weight).value());
  EXPECT_TRUE(variants_->first.head_trained);
  EXPECT_FALSE(variants_->rand.head_trained);
  EXPECT_EQ(variants_->rand.variant, Variant::kRandInit);
}

TEST_F(VariantsTest, TrainedHeadsAgree) {
  int agree = 0;
  for (const auto& d : split_->test) {
    agree += predict(variants_->first, d) == predict(variants_->second, d);
  }
  EXPECT_GE(static_cast<double>(agree) / static_cast<double>(split_->test.size()), 0.9);
  EXPECT_GE(Accuracy(variants_->first, split_->test), 0.9);
}

TEST(VariantsErrorTest, IdenticalHeadSeedsNeedOverride) {
  const text::DatasetSplit split = SyntheticSplit(100, 7);
  VariantSeeds seeds{1, 2, 3, 3, 4};
  EXPECT_THROW(make_variants(SmallModel(VocabSize(split), EncoderType::kNone), split,
                             FastTrain(), seeds),
               ContractError);
}

}  // namespace
}  // namespace randcheck::model
