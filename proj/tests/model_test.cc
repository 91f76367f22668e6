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

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "randcheck/errors.h"
#include "randcheck/model.h"
#include "randcheck/ops.h"
#include "test_util.h"

namespace randcheck::model {
namespace {

using randcheck::testing::ScratchDir;
using randcheck::testing::SmallModel;

std::vector<int> RandomIds(Rng& rng, int length, int vocab) {
  std::vector<int> ids(static_cast<std::size_t>(length));
  for (int& id : ids) id = 2 + static_cast<int>(rng.Below(static_cast<std::uint64_t>(vocab - 2)));
  return ids;
}

TEST(HeNormalTest, MomentsMatchTwoOverFanIn) {
  const RowMatrixXd w = HeNormal(300, 200, 50, 1234);
  const double n = static_cast<double>(w.size());
  const double mean = w.mean();
  const double var = (w.array() - mean).square().sum() / (n - 1.0);
  // Standard errors: sqrt(0.04 / 60000) for the mean, 0.04 * sqrt(2 / 60000) for the variance.
  EXPECT_NEAR(mean, 0.0, 5 * std::sqrt(0.04 / n));
  EXPECT_NEAR(var, 0.04, 5 * 0.04 * std::sqrt(2.0 / n));
}

TEST(InitTest, DeterministicAndSeedSeparated) {
  const ModelConfig cfg = SmallModel(40, EncoderType::kSelfAttention);
  ModelCheckpoint a = init_params(cfg, 1, 2);
  ModelCheckpoint b = init_params(cfg, 1, 2);
  ModelCheckpoint other_head = init_params(cfg, 1, 3);
  EXPECT_EQ(a.ContentHash(), b.ContentHash());
  for (const auto& [name, t] : a.params) {
    const bool same = t.value() == other_head.at(name).value();
    if (IsHeadParam(name)) {
      if (name.find("bias") == std::string::npos) EXPECT_FALSE(same) << name;
    } else {
      EXPECT_TRUE(same) << name;
    }
  }
}

TEST(InitTest, BiasesStartAtZeroAndNormAtIdentity) {
  ModelCheckpoint c = init_params(SmallModel(40, EncoderType::kSelfAttention), 1, 2);
  EXPECT_TRUE(c.at(param::kFc1Bias).value().isZero());
  EXPECT_TRUE(c.at(param::kFc2Bias).value().isZero());
  EXPECT_TRUE(c.at(param::kNormGain).value().isOnes());
  EXPECT_TRUE(c.at(param::kNormBias).value().isZero());
}

TEST(ConfigTest, ValidateRejectsBadValues) {
  ModelConfig c = SmallModel(40, EncoderType::kNone);
  c.classes = 1;
  EXPECT_THROW(c.Validate(), ContractError);
  c = SmallModel(40, EncoderType::kNone);
  c.hidden_units = 1;
  EXPECT_THROW(c.Validate(), ContractError);
  TrainConfig t;
  t.patience = t.max_epochs;
  EXPECT_THROW(t.Validate(), ContractError);
  t = {};
  t.learning_rates = {};
  EXPECT_THROW(t.Validate(), ContractError);
}

TEST(NameTest, RoundTrip) {
  for (Variant v : {Variant::kEncoderPretrain, Variant::kFirstInit, Variant::kSecondInit,
                    Variant::kRandInit}) {
    EXPECT_EQ(ParseVariant(Name(v)), v);
  }
  for (EncoderType e : {EncoderType::kNone, EncoderType::kSelfAttention}) {
    EXPECT_EQ(ParseEncoderType(Name(e)), e);
  }
  EXPECT_THROW(ParseVariant("Bogus"), ContractError);
}

TEST(ForwardTest, PathsAgree) {
  Rng rng(8);
  for (EncoderType enc : {EncoderType::kNone, EncoderType::kSelfAttention}) {
    ModelCheckpoint c = init_params(SmallModel(40, enc), 5, 6);
    for (int trial = 0; trial < 10; ++trial) {
      text::TokenizedDoc doc;
      doc.ids = RandomIds(rng, 3 + trial, 40);
      const Eigen::VectorXd plain = Logits(c, doc.ids);
      ForwardResult f = forward(c, doc);
      const Eigen::VectorXd via_training = TrainingLogits(c, doc.ids).value().row(0).transpose();
      EXPECT_TRUE(f.input_embeddings.requires_grad());
      EXPECT_EQ(f.input_embeddings.shape(), (autodiff::Shape{3 + trial, 8}));
      EXPECT_LT((f.logits.value().row(0).transpose() - plain).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((via_training - plain).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_EQ(predict(c, doc), Argmax(plain));
    }
  }
}

// Mean pooling with no positional signal makes the classifier a bag of tokens.
TEST(ForwardTest, PermutationInvariant) {
  Rng rng(21);
  for (EncoderType enc : {EncoderType::kNone, EncoderType::kSelfAttention}) {
    ModelCheckpoint c = init_params(SmallModel(50, enc), 7, 8);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> ids = RandomIds(rng, 12, 50);
      const Eigen::VectorXd before = Logits(c, ids);
      rng.Shuffle(ids);
      EXPECT_LT((Logits(c, ids) - before).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(ForwardTest, RejectsEmptyAndOutOfRange) {
  ModelCheckpoint c = init_params(SmallModel(10, EncoderType::kNone), 1, 2);
  std::vector<int> none;
  std::vector<int> bad{3, 10};
  EXPECT_THROW(Logits(c, none), ContractError);
  EXPECT_THROW(Logits(c, bad), ContractError);
}

TEST(ArgmaxTest, TiesGoToLowestIndex) {
  EXPECT_EQ(Argmax(Eigen::Vector3d(1.0, 1.0, 0.0)), 0);
  EXPECT_EQ(Argmax(Eigen::Vector3d(0.0, 2.0, 2.0)), 1);
  EXPECT_EQ(Argmax(Eigen::Vector3d(-1.0, -3.0, -0.5)), 2);
}

TEST(CheckpointTest, SaveLoadIsBitExact) {
  ScratchDir dir;
  for (EncoderType enc : {EncoderType::kNone, EncoderType::kSelfAttention}) {
    ModelCheckpoint c = init_params(SmallModel(30, enc), 11, 12, Variant::kSecondInit);
    c.train_config = TrainConfig{};
    c.head_trained = true;
    // Values that do not survive a short decimal printing.
    c.at(param::kFc2Bias).mutable_value()(0, 0) = 0.1 + 0.2;
    c.at(param::kFc2Bias).mutable_value()(0, 1) = std::nextafter(1.0, 2.0);
    SaveCheckpoint(c, dir / "c.json");
    ModelCheckpoint back = LoadCheckpoint(dir / "c.json");
    EXPECT_EQ(back.ContentHash(), c.ContentHash());
    EXPECT_EQ(back.variant, Variant::kSecondInit);
    EXPECT_TRUE(back.head_trained);
    ASSERT_TRUE(back.train_config.has_value());
    ASSERT_EQ(back.params.size(), c.params.size());
    for (const auto& [name, t] : c.params) {
      EXPECT_TRUE(back.at(name).value() == t.value()) << name;
      EXPECT_EQ(back.at(name).shape(), t.shape()) << name;
    }
  }
}

TEST(CheckpointTest, CorruptParameterIsRejected) {
  ModelCheckpoint c = init_params(SmallModel(30, EncoderType::kNone), 1, 2);
  nlohmann::json j = ToJson(c);
  j["params"]["head.fc1.bias"]["data"].erase(0);
  EXPECT_THROW(CheckpointFromJson(j), ContractError);
}

TEST(CheckpointTest, CopyIsDeep) {
  ModelCheckpoint c = init_params(SmallModel(30, EncoderType::kNone), 1, 2);
  ModelCheckpoint copy = c;
  copy.at(param::kFc1Bias).mutable_value()(0, 0) = 9.0;
  EXPECT_EQ(c.at(param::kFc1Bias).value()(0, 0), 0.0);
}

}  // namespace
}  // namespace randcheck::model
