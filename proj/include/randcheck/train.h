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

#ifndef RANDCHECK_TRAIN_H_
#define RANDCHECK_TRAIN_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "randcheck/model.h"
#include "randcheck/text.h"

namespace randcheck::model {

// Decoupled weight decay Adam.
class AdamW {
 public:
  struct Options {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(std::vector<TensorXd> params, Options options);

  // Updates every parameter that holds a gradient.
  void Step();
  void ZeroGrad();

 private:
  std::vector<TensorXd> params_;
  std::vector<RowMatrixXd> first_moment_;
  std::vector<RowMatrixXd> second_moment_;
  std::vector<long> steps_;
  Options options_;
};

enum class Trainable { kHeadOnly, kAll };

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
};

struct TrainingLog {
  double learning_rate = 0.0;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  // Best validation accuracy per learning rate, in grid order.
  std::vector<std::pair<double, double>> grid;
};

struct TrainResult {
  ModelCheckpoint checkpoint;
  TrainingLog log;
};

// Trains with a fixed learning rate. Stops once validation accuracy has not
// increased for `patience` consecutive epochs and returns the parameters of
// the first epoch reaching the best validation accuracy.
TrainResult TrainWithLearningRate(const ModelCheckpoint& init,
                                  const text::DatasetSplit& split,
                                  const TrainConfig& tc, double learning_rate,
                                  Trainable trainable);

// Runs every learning rate in tc.learning_rates from the same initial
// parameters and keeps the run with the best validation accuracy (earliest
// grid entry on ties). Encoder parameters are updated only for kAll.
TrainResult train(const ModelCheckpoint& init, const text::DatasetSplit& split,
                  const TrainConfig& tc, Trainable trainable);

// Trainable set taken from init.config.fine_tune_encoder.
TrainResult train(const ModelCheckpoint& init, const text::DatasetSplit& split,
                  const TrainConfig& tc);

struct VariantSeeds {
  std::uint64_t encoder = 0;
  // Throwaway head used while producing the shared encoder.
  std::uint64_t pretrain_head = 0;
  std::uint64_t first_head = 1;
  std::uint64_t second_head = 2;
  std::uint64_t rand_head = 3;
  // When false, SecondInit is shuffled with a derived seed instead of tc.seed.
  bool shared_shuffle_seed = true;
  // Debug override that permits first_head == second_head.
  bool allow_identical_heads = false;
};

struct Variants {
  ModelCheckpoint pretrain;
  ModelCheckpoint first;
  ModelCheckpoint second;
  ModelCheckpoint rand;
  TrainingLog pretrain_log;
  TrainingLog first_log;
  TrainingLog second_log;
};

// Copies every non-head parameter from `source` into `target`.
void CopyEncoder(const ModelCheckpoint& source, ModelCheckpoint& target);

// Produces the shared encoder with one full training run, then trains
// FirstInit and SecondInit heads on top of it and builds RandInit from
// FirstInit's encoder plus a fresh untrained head.
Variants make_variants(const ModelConfig& config, const text::DatasetSplit& split,
                       const TrainConfig& tc, const VariantSeeds& seeds);

// CSV `epoch,train_loss,val_acc`.
void WriteTrainingLog(const TrainingLog& log, const std::filesystem::path& path);

}  // namespace randcheck::model

#endif  // RANDCHECK_TRAIN_H_
