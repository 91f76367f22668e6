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

#include "randcheck/model.h"

#include <cmath>
#include <cstring>
#include <fstream>

#include "randcheck/errors.h"
#include "randcheck/ops.h"
#include "randcheck/random.h"

namespace randcheck::model {

using autodiff::Shape;
using nlohmann::json;

std::string_view Name(EncoderType type) {
  return type == EncoderType::kNone ? "none" : "self_attention_block";
}

std::string_view Name(Variant variant) {
  switch (variant) {
    case Variant::kEncoderPretrain:
      return "EncoderPretrain";
    case Variant::kFirstInit:
      return "FirstInit";
    case Variant::kSecondInit:
      return "SecondInit";
    case Variant::kRandInit:
      return "RandInit";
  }
  return "?";
}

EncoderType ParseEncoderType(std::string_view name) {
  if (name == "none") return EncoderType::kNone;
  if (name == "self_attention_block") return EncoderType::kSelfAttention;
  throw ContractError("unknown encoder_type '" + std::string(name) + "'");
}

Variant ParseVariant(std::string_view name) {
  for (Variant v : {Variant::kEncoderPretrain, Variant::kFirstInit,
                    Variant::kSecondInit, Variant::kRandInit}) {
    if (Name(v) == name) return v;
  }
  throw ContractError("unknown variant '" + std::string(name) + "'");
}

void ModelConfig::Validate() const {
  auto positive = [](int value, const char* field) {
    if (value <= 0) {
      throw ContractError(std::string("model.") + field + " must be positive");
    }
  };
  positive(vocab_size, "vocab_size");
  positive(embed_dim, "embed_dim");
  positive(encoder_dim, "encoder_dim");
  positive(hidden_units, "hidden_units");
  positive(classes, "classes");
  positive(max_seq_len, "max_seq_len");
  if (classes < 2) throw ContractError("model.classes must be at least 2");
  if (hidden_units < classes) {
    throw ContractError("model.hidden_units must be >= classes");
  }
}

void TrainConfig::Validate() const {
  if (learning_rates.empty()) throw ContractError("train.learning_rates must be non-empty");
  for (double lr : learning_rates) {
    if (!(lr > 0.0)) throw ContractError("train.learning_rates must be positive");
  }
  if (max_epochs < 1) throw ContractError("train.max_epochs must be positive");
  if (patience < 1 || patience >= max_epochs) {
    throw ContractError("train.patience must lie in [1, max_epochs)");
  }
  if (batch_size < 1) throw ContractError("train.batch_size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ContractError("train.beta1/beta2 must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ContractError("train.eps must be positive");
  if (weight_decay < 0.0) throw ContractError("train.weight_decay must be >= 0");
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"vocab_size", c.vocab_size},
           {"embed_dim", c.embed_dim},
           {"encoder_type", Name(c.encoder_type)},
           {"encoder_dim", c.encoder_dim},
           {"hidden_units", c.hidden_units},
           {"classes", c.classes},
           {"max_seq_len", c.max_seq_len},
           {"fine_tune_encoder", c.fine_tune_encoder}};
}

void from_json(const json& j, ModelConfig& c) {
  c.vocab_size = j.at("vocab_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.encoder_type = ParseEncoderType(j.at("encoder_type").get<std::string>());
  c.encoder_dim = j.at("encoder_dim").get<int>();
  c.hidden_units = j.at("hidden_units").get<int>();
  c.classes = j.at("classes").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.fine_tune_encoder = j.at("fine_tune_encoder").get<bool>();
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"learning_rates", c.learning_rates},
           {"max_epochs", c.max_epochs},
           {"patience", c.patience},
           {"batch_size", c.batch_size},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"eps", c.eps},
           {"weight_decay", c.weight_decay},
           {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  c.learning_rates = j.at("learning_rates").get<std::vector<double>>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.eps = j.at("eps").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

bool IsHeadParam(std::string_view name) { return name.starts_with("head."); }

ModelCheckpoint::ModelCheckpoint(const ModelCheckpoint& other)
    : config(other.config),
      encoder_seed(other.encoder_seed),
      head_seed(other.head_seed),
      variant(other.variant),
      train_config(other.train_config),
      encoder_trained(other.encoder_trained),
      head_trained(other.head_trained) {
  for (const auto& [name, t] : other.params) params.emplace(name, t.clone());
}

ModelCheckpoint& ModelCheckpoint::operator=(const ModelCheckpoint& other) {
  if (this != &other) {
    ModelCheckpoint copy(other);
    *this = std::move(copy);
  }
  return *this;
}

const TensorXd& ModelCheckpoint::at(std::string_view name) const {
  auto it = params.find(name);
  if (it == params.end()) {
    throw ContractError("checkpoint: missing parameter '" + std::string(name) + "'");
  }
  return it->second;
}

TensorXd& ModelCheckpoint::at(std::string_view name) {
  return const_cast<TensorXd&>(std::as_const(*this).at(name));
}

std::uint64_t ModelCheckpoint::ContentHash() const {
  std::uint64_t h = Fnv1a(json(config).dump());
  h = Fnv1a(std::to_string(encoder_seed) + "/" + std::to_string(head_seed) + "/" +
                std::string(Name(variant)),
            h);
  for (const auto& [name, t] : params) {
    h = Fnv1a(name, h);
    h = Fnv1a(std::string_view(reinterpret_cast<const char*>(t.value().data()),
                               static_cast<std::size_t>(t.size()) * sizeof(double)),
              h);
  }
  return h;
}

RowMatrixXd HeNormal(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                     std::uint64_t seed) {
  Rng rng(seed);
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  RowMatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Normal(0.0, stddev);
  return m;
}

namespace {

void AddParam(ModelCheckpoint& ckpt, std::string_view name, RowMatrixXd value,
              bool vector) {
  Shape shape = vector ? Shape{value.cols()} : Shape{value.rows(), value.cols()};
  ckpt.params.emplace(std::string(name), TensorXd(std::move(shape), std::move(value)));
}

std::uint64_t LayerSeed(std::uint64_t base, std::string_view name) {
  return DeriveSeed(base, name);
}

}  // namespace

ModelCheckpoint init_params(const ModelConfig& config, std::uint64_t encoder_seed,
                            std::uint64_t head_seed, Variant variant) {
  config.Validate();
  ModelCheckpoint ckpt;
  ckpt.config = config;
  ckpt.encoder_seed = encoder_seed;
  ckpt.head_seed = head_seed;
  ckpt.variant = variant;

  const Eigen::Index d = config.embed_dim;
  const Eigen::Index e = config.encoder_dim;
  const Eigen::Index h = config.hidden_units;
  const Eigen::Index k = config.classes;

  {
    // Variance 1 / embed_dim.
    Rng rng(LayerSeed(encoder_seed, param::kEmbedding));
    RowMatrixXd table(config.vocab_size, d);
    const double stddev = std::sqrt(1.0 / static_cast<double>(d));
    for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = rng.Normal(0.0, stddev);
    AddParam(ckpt, param::kEmbedding, std::move(table), false);
  }
  if (config.encoder_type == EncoderType::kSelfAttention) {
    for (auto name : {param::kQuery, param::kKey, param::kValue}) {
      AddParam(ckpt, name, HeNormal(d, e, d, LayerSeed(encoder_seed, name)), false);
    }
    AddParam(ckpt, param::kOutput,
             HeNormal(e, d, e, LayerSeed(encoder_seed, param::kOutput)), false);
    AddParam(ckpt, param::kNormGain, RowMatrixXd::Ones(1, d), true);
    AddParam(ckpt, param::kNormBias, RowMatrixXd::Zero(1, d), true);
  }
  AddParam(ckpt, param::kFc1Weight,
           HeNormal(d, h, d, LayerSeed(head_seed, param::kFc1Weight)), false);
  AddParam(ckpt, param::kFc1Bias, RowMatrixXd::Zero(1, h), true);
  AddParam(ckpt, param::kFc2Weight,
           HeNormal(h, k, h, LayerSeed(head_seed, param::kFc2Weight)), false);
  AddParam(ckpt, param::kFc2Bias, RowMatrixXd::Zero(1, k), true);
  return ckpt;
}

RowMatrixXd Embed(const ModelCheckpoint& ckpt, std::span<const int> ids) {
  const RowMatrixXd& table = ckpt.at(param::kEmbedding).value();
  RowMatrixXd out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw ContractError("embed: token id " + std::to_string(ids[i]) +
                          " outside vocabulary of " + std::to_string(table.rows()));
    }
    out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  }
  return out;
}

TensorXd EncodePooled(const ModelCheckpoint& ckpt, const TensorXd& x) {
  using namespace autodiff;
  if (x.rank() != 2 || x.shape()[0] == 0) {
    throw ContractError("forward: empty document");
  }
  if (ckpt.config.encoder_type == EncoderType::kNone) return mean_rows(x);
  const TensorXd q = matmul(x, ckpt.at(param::kQuery));
  const TensorXd k = matmul(x, ckpt.at(param::kKey));
  const TensorXd v = matmul(x, ckpt.at(param::kValue));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(ckpt.config.encoder_dim));
  const TensorXd attn = softmax(scale(matmul(q, transpose(k)), inv_sqrt), 1);
  const TensorXd mixed = matmul(matmul(attn, v), ckpt.at(param::kOutput));
  const TensorXd y = layer_norm(add(x, mixed), ckpt.at(param::kNormGain),
                                ckpt.at(param::kNormBias));
  return mean_rows(y);
}

TensorXd HeadLogits(const ModelCheckpoint& ckpt, const TensorXd& pooled) {
  using namespace autodiff;
  const TensorXd hidden =
      relu(add(matmul(pooled, ckpt.at(param::kFc1Weight)), ckpt.at(param::kFc1Bias)));
  return add(matmul(hidden, ckpt.at(param::kFc2Weight)), ckpt.at(param::kFc2Bias));
}

TensorXd LogitsFromEmbeddings(const ModelCheckpoint& ckpt, const TensorXd& embeddings) {
  return HeadLogits(ckpt, EncodePooled(ckpt, embeddings));
}

ForwardResult forward(const ModelCheckpoint& ckpt, const text::TokenizedDoc& doc) {
  if (doc.ids.empty()) throw ContractError("forward: empty document");
  TensorXd embeddings = TensorXd::FromMatrix(Embed(ckpt, doc.ids), true);
  TensorXd logits = LogitsFromEmbeddings(ckpt, embeddings);
  return {std::move(logits), std::move(embeddings)};
}

TensorXd TrainingLogits(const ModelCheckpoint& ckpt, std::span<const int> ids) {
  if (ids.empty()) throw ContractError("forward: empty document");
  return LogitsFromEmbeddings(ckpt,
                              autodiff::embedding_lookup(ckpt.at(param::kEmbedding), ids));
}

Eigen::VectorXd Logits(const ModelCheckpoint& ckpt, std::span<const int> ids) {
  if (ids.empty()) throw ContractError("forward: empty document");
  const TensorXd logits = LogitsFromEmbeddings(ckpt, TensorXd::FromMatrix(Embed(ckpt, ids)));
  return logits.value().row(0).transpose();
}

int Argmax(const Eigen::Ref<const Eigen::VectorXd>& values) {
  int best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = static_cast<int>(i);
  }
  return best;
}

int predict(const ModelCheckpoint& ckpt, std::span<const int> ids) {
  return Argmax(Logits(ckpt, ids));
}

int predict(const ModelCheckpoint& ckpt, const text::TokenizedDoc& doc) {
  return predict(ckpt, doc.ids);
}

json ToJson(const ModelCheckpoint& ckpt) {
  json params = json::object();
  for (const auto& [name, t] : ckpt.params) {
    std::vector<double> data(t.value().data(), t.value().data() + t.size());
    params[name] = json{{"shape", t.shape()}, {"data", std::move(data)}};
  }
  return json{{"format", "randcheck-checkpoint"},
              {"version", 1},
              {"config", ckpt.config},
              {"encoder_seed", ckpt.encoder_seed},
              {"head_seed", ckpt.head_seed},
              {"variant", Name(ckpt.variant)},
              {"train_config", ckpt.train_config ? json(*ckpt.train_config) : json()},
              {"encoder_trained", ckpt.encoder_trained},
              {"head_trained", ckpt.head_trained},
              {"params", std::move(params)}};
}

ModelCheckpoint CheckpointFromJson(const json& j) {
  if (j.value("format", "") != "randcheck-checkpoint" || j.value("version", 0) != 1) {
    throw ContractError("checkpoint: unsupported format or version");
  }
  ModelCheckpoint ckpt;
  ckpt.config = j.at("config").get<ModelConfig>();
  ckpt.encoder_seed = j.at("encoder_seed").get<std::uint64_t>();
  ckpt.head_seed = j.at("head_seed").get<std::uint64_t>();
  ckpt.variant = ParseVariant(j.at("variant").get<std::string>());
  if (!j.at("train_config").is_null()) {
    ckpt.train_config = j.at("train_config").get<TrainConfig>();
  }
  ckpt.encoder_trained = j.at("encoder_trained").get<bool>();
  ckpt.head_trained = j.at("head_trained").get<bool>();
  for (const auto& [name, entry] : j.at("params").items()) {
    Shape shape = entry.at("shape").get<Shape>();
    const auto data = entry.at("data").get<std::vector<double>>();
    const Eigen::Index rows = shape.size() == 2 ? shape[0] : 1;
    const Eigen::Index cols = shape.empty() ? 1 : shape.back();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw ContractError("checkpoint: parameter '" + name + "' has wrong size");
    }
    RowMatrixXd m = Eigen::Map<const RowMatrixXd>(data.data(), rows, cols);
    ckpt.params.emplace(name, TensorXd(std::move(shape), std::move(m)));
  }
  return ckpt;
}

void SaveCheckpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << ToJson(ckpt).dump() << '\n';
}

ModelCheckpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return CheckpointFromJson(json::parse(in));
}

}  // namespace randcheck::model
