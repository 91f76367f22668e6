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

// Desk-scale text classifier:
//   embedding -> [self-attention block] -> mean pooling -> FC -> ReLU -> FC(K)
// The self-attention block is single-head with a residual connection and
// layer norm. Parameters live in a ModelCheckpoint with value semantics.

#ifndef RANDCHECK_MODEL_H_
#define RANDCHECK_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "randcheck/tensor.h"
#include "randcheck/text.h"

namespace randcheck::model {

using autodiff::RowMatrixXd;
using autodiff::TensorXd;

enum class EncoderType { kNone, kSelfAttention };
enum class Variant { kEncoderPretrain, kFirstInit, kSecondInit, kRandInit };

std::string_view Name(EncoderType type);
std::string_view Name(Variant variant);
EncoderType ParseEncoderType(std::string_view name);
Variant ParseVariant(std::string_view name);

struct ModelConfig {
  int vocab_size = 0;
  int embed_dim = 16;
  EncoderType encoder_type = EncoderType::kSelfAttention;
  // Query/key/value width of the attention block.
  int encoder_dim = 16;
  int hidden_units = 64;
  int classes = 2;
  int max_seq_len = 128;
  bool fine_tune_encoder = false;

  // Throws ContractError naming the offending field.
  void Validate() const;
};

struct TrainConfig {
  std::vector<double> learning_rates{1e-2, 1e-3, 1e-4, 1e-5};
  int max_epochs = 25;
  int patience = 5;
  int batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  // Drives the per-epoch shuffle order.
  std::uint64_t seed = 0;

  void Validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

namespace param {
inline constexpr std::string_view kEmbedding = "embedding";
inline constexpr std::string_view kQuery = "encoder.query";
inline constexpr std::string_view kKey = "encoder.key";
inline constexpr std::string_view kValue = "encoder.value";
inline constexpr std::string_view kOutput = "encoder.output";
inline constexpr std::string_view kNormGain = "encoder.norm_gain";
inline constexpr std::string_view kNormBias = "encoder.norm_bias";
inline constexpr std::string_view kFc1Weight = "head.fc1.weight";
inline constexpr std::string_view kFc1Bias = "head.fc1.bias";
inline constexpr std::string_view kFc2Weight = "head.fc2.weight";
inline constexpr std::string_view kFc2Bias = "head.fc2.bias";
}  // namespace param

bool IsHeadParam(std::string_view name);

class ModelCheckpoint {
 public:
  ModelConfig config;
  std::uint64_t encoder_seed = 0;
  std::uint64_t head_seed = 0;
  Variant variant = Variant::kFirstInit;
  std::optional<TrainConfig> train_config;
  bool encoder_trained = false;
  bool head_trained = false;
  std::map<std::string, TensorXd, std::less<>> params;

  ModelCheckpoint() = default;
  // Copies are deep: no two checkpoints ever alias parameter storage.
  ModelCheckpoint(const ModelCheckpoint& other);
  ModelCheckpoint& operator=(const ModelCheckpoint& other);
  ModelCheckpoint(ModelCheckpoint&&) noexcept = default;
  ModelCheckpoint& operator=(ModelCheckpoint&&) noexcept = default;

  const TensorXd& at(std::string_view name) const;
  TensorXd& at(std::string_view name);

  // Deterministic digest of config, seeds and parameter bytes.
  std::uint64_t ContentHash() const;
};

// Zero-mean normal draws with variance 2 / fan_in.
RowMatrixXd HeNormal(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                     std::uint64_t seed);

// Encoder layers (embedding included) draw from encoder_seed, head layers
// from head_seed; each layer gets its own derived stream.
ModelCheckpoint init_params(const ModelConfig& config,
                            std::uint64_t encoder_seed,
                            std::uint64_t head_seed,
                            Variant variant = Variant::kFirstInit);

// Rows of the embedding table for `ids`, as a [L, D] constant.
RowMatrixXd Embed(const ModelCheckpoint& ckpt, std::span<const int> ids);

// Pooled encoder output [D] for input embeddings [L, D]. Differentiable.
TensorXd EncodePooled(const ModelCheckpoint& ckpt, const TensorXd& embeddings);

// Head applied to pooled features [D] -> [K] or [B, D] -> [B, K].
TensorXd HeadLogits(const ModelCheckpoint& ckpt, const TensorXd& pooled);

TensorXd LogitsFromEmbeddings(const ModelCheckpoint& ckpt,
                              const TensorXd& embeddings);

struct ForwardResult {
  TensorXd logits;
  // [L, D] leaf with requires_grad set.
  TensorXd input_embeddings;
};

ForwardResult forward(const ModelCheckpoint& ckpt, const text::TokenizedDoc& doc);

// Logits through the embedding_lookup op, so the table receives gradients.
TensorXd TrainingLogits(const ModelCheckpoint& ckpt, std::span<const int> ids);

// Plain logits vector, no gradient tracking.
Eigen::VectorXd Logits(const ModelCheckpoint& ckpt, std::span<const int> ids);

// First index of the maximum.
int Argmax(const Eigen::Ref<const Eigen::VectorXd>& values);

int predict(const ModelCheckpoint& ckpt, const text::TokenizedDoc& doc);
int predict(const ModelCheckpoint& ckpt, std::span<const int> ids);

nlohmann::json ToJson(const ModelCheckpoint& ckpt);
ModelCheckpoint CheckpointFromJson(const nlohmann::json& j);
void SaveCheckpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace randcheck::model

#endif  // RANDCHECK_MODEL_H_
