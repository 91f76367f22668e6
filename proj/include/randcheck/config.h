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

// Experiment configuration: a sectioned JSON document with one object per
// pipeline stage. Every key is optional and falls back to the default listed
// by ConfigSchema().

#ifndef RANDCHECK_CONFIG_H_
#define RANDCHECK_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "randcheck/attributions.h"
#include "randcheck/model.h"
#include "randcheck/text.h"

namespace randcheck::harness {

struct CorpusOptions {
  // Empty path selects the synthetic generator.
  std::string path;
  text::CorpusFormat format = text::CorpusFormat::kCsv;
  text::SyntheticSpec synthetic;
};

struct SplitOptions {
  double train_ratio = 0.8;
  double test_ratio = 0.2;
  // Share of the training part held out for validation.
  double val_fraction = 0.1;
};

struct VocabOptions {
  int min_freq = 2;
  int max_size = 20000;
};

struct SeedOptions {
  std::uint64_t global = 0;
  // Explicit values replace the derived ones.
  std::optional<std::uint64_t> data;
  std::optional<std::uint64_t> encoder;
  std::optional<std::uint64_t> pretrain_head;
  std::optional<std::uint64_t> first_head;
  std::optional<std::uint64_t> second_head;
  std::optional<std::uint64_t> rand_head;
  std::optional<std::uint64_t> shuffle;
  std::optional<std::uint64_t> methods;
  bool shared_shuffle_seed = true;
  // Debug override: lets first_head equal second_head.
  bool allow_identical_heads = false;
};

// Sub-seed i is DeriveSeed(global, name_i) unless overridden.
struct ResolvedSeeds {
  std::uint64_t data = 0;
  std::uint64_t encoder = 0;
  std::uint64_t pretrain_head = 0;
  std::uint64_t first_head = 0;
  std::uint64_t second_head = 0;
  std::uint64_t rand_head = 0;
  std::uint64_t shuffle = 0;
  std::uint64_t methods = 0;
};

struct EvalOptions {
  std::size_t eval_subsample_size = 200;
  std::vector<double> k_percent{10, 25};
  std::vector<attribution::Method> methods{
      attribution::Method::kVanilla, attribution::Method::kSmoothGrad,
      attribution::Method::kIntegratedGradients, attribution::Method::kKernelShap,
      attribution::Method::kRandom};
  std::vector<attribution::Reduction> reductions{attribution::Reduction::kL2};
  std::vector<double> sg_sigma_grid{0.01, 0.05, 0.1, 0.2};
  int sg_n_iter = 10;
  // Documents used for sigma selection; 0 uses the whole subsample.
  std::size_t sg_selection_docs = 0;
  int ig_steps = 50;
  // 0 means 2L + 2048 coalitions per document.
  std::size_t shap_coalitions = 0;
  attribution::Target target = attribution::Target::kLogit;
  double within_units = 10.0;
};

struct ExperimentConfig {
  CorpusOptions corpus;
  SplitOptions split;
  VocabOptions vocab;
  // vocab_size is filled in from the built vocabulary.
  model::ModelConfig model;
  model::TrainConfig train;
  SeedOptions seeds;
  EvalOptions eval;
};

ExperimentConfig DefaultConfig();

// Canonical form with every key present.
nlohmann::json ToJson(const ExperimentConfig& config);

// Rejects unknown keys, wrong types and out-of-range values with a
// ConfigError naming the dotted field path.
ExperimentConfig ParseConfig(const nlohmann::json& j);

// Missing or unparsable files raise ConfigError as well.
ExperimentConfig LoadConfig(const std::filesystem::path& path);

ResolvedSeeds ResolveSeeds(const SeedOptions& seeds);

struct ConfigKey {
  std::string path;
  std::string default_value;
  std::string description;
};

std::vector<ConfigKey> ConfigSchema();
std::string ConfigHelp();

}  // namespace randcheck::harness

#endif  // RANDCHECK_CONFIG_H_
