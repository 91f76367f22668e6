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

#include "randcheck/train.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "randcheck/errors.h"
#include "randcheck/format.h"
#include "randcheck/ops.h"
#include "randcheck/random.h"

namespace randcheck::model {

AdamW::AdamW(std::vector<TensorXd> params, Options options)
    : params_(std::move(params)), options_(options) {
  for (const TensorXd& p : params_) {
    first_moment_.push_back(RowMatrixXd::Zero(p.value().rows(), p.value().cols()));
    second_moment_.push_back(RowMatrixXd::Zero(p.value().rows(), p.value().cols()));
    steps_.push_back(0);
  }
}

void AdamW::Step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    TensorXd& p = params_[i];
    if (!p.has_grad()) continue;
    const RowMatrixXd& g = p.grad();
    RowMatrixXd& m = first_moment_[i];
    RowMatrixXd& v = second_moment_[i];
    const long t = ++steps_[i];
    m = options_.beta1 * m + (1.0 - options_.beta1) * g;
    v = options_.beta2 * v + (1.0 - options_.beta2) * g.cwiseProduct(g);
    const double bias1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t));
    const double bias2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t));
    RowMatrixXd& w = p.mutable_value();
    w *= 1.0 - options_.learning_rate * options_.weight_decay;
    const RowMatrixXd denom =
        (v.array().sqrt() / std::sqrt(bias2) + options_.eps).matrix();
    w.array() -= (options_.learning_rate / bias1) * m.array() / denom.array();
  }
}

void AdamW::ZeroGrad() {
  for (TensorXd& p : params_) p.zero_grad();
}

namespace {

using text::TokenizedDoc;

// Pooled encoder features, one row per document.
RowMatrixXd PooledFeatures(const ModelCheckpoint& ckpt,
                           std::span<const TokenizedDoc> docs) {
  RowMatrixXd out(static_cast<Eigen::Index>(docs.size()), ckpt.config.embed_dim);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        EncodePooled(ckpt, TensorXd::FromMatrix(Embed(ckpt, docs[i].ids))).value().row(0);
  }
  return out;
}

class Trainer {
 public:
  Trainer(ModelCheckpoint& ckpt, const text::DatasetSplit& split, Trainable trainable)
      : ckpt_(ckpt), split_(split), head_only_(trainable == Trainable::kHeadOnly) {
    if (head_only_) {
      train_features_ = PooledFeatures(ckpt_, split_.train);
      val_features_ = PooledFeatures(ckpt_, split_.validation);
    }
  }

  TensorXd BatchLoss(std::span<const std::size_t> batch) const {
    using namespace autodiff;
    std::vector<int> labels;
    for (std::size_t i : batch) labels.push_back(split_.train[i].label);
    if (head_only_) {
      RowMatrixXd x(static_cast<Eigen::Index>(batch.size()), train_features_.cols());
      for (std::size_t r = 0; r < batch.size(); ++r) {
        x.row(static_cast<Eigen::Index>(r)) =
            train_features_.row(static_cast<Eigen::Index>(batch[r]));
      }
      return cross_entropy(HeadLogits(ckpt_, TensorXd::FromMatrix(x)),
                           std::span<const int>(labels), 1);
    }
    TensorXd total;
    for (std::size_t r = 0; r < batch.size(); ++r) {
      const TokenizedDoc& doc = split_.train[batch[r]];
      TensorXd loss = cross_entropy(TrainingLogits(ckpt_, doc.ids),
                                    std::span<const int>(&labels[r], 1), 0);
      total = r == 0 ? loss : add(total, loss);
    }
    return scale(total, 1.0 / static_cast<double>(batch.size()));
  }

  double ValidationAccuracy() const {
    std::size_t correct = 0;
    if (head_only_) {
      const TensorXd logits = HeadLogits(ckpt_, TensorXd::FromMatrix(val_features_));
      for (Eigen::Index r = 0; r < logits.value().rows(); ++r) {
        const Eigen::VectorXd row = logits.value().row(r).transpose();
        if (Argmax(row) == split_.validation[static_cast<std::size_t>(r)].label) ++correct;
      }
    } else {
      for (const TokenizedDoc& doc : split_.validation) {
        if (predict(ckpt_, doc) == doc.label) ++correct;
      }
    }
    return static_cast<double>(correct) / static_cast<double>(split_.validation.size());
  }

 private:
  ModelCheckpoint& ckpt_;
  const text::DatasetSplit& split_;
  bool head_only_;
  RowMatrixXd train_features_;
  RowMatrixXd val_features_;
};

void Freeze(ModelCheckpoint& ckpt) {
  for (auto& [name, t] : ckpt.params) {
    t.set_requires_grad(false);
    t.zero_grad();
  }
}

}  // namespace

TrainResult TrainWithLearningRate(const ModelCheckpoint& init,
                                  const text::DatasetSplit& split,
                                  const TrainConfig& tc, double learning_rate,
                                  Trainable trainable) {
  tc.Validate();
  if (split.train.empty() || split.validation.empty()) {
    throw ContractError("train: empty train or validation split");
  }
  ModelCheckpoint ckpt = init;
  std::vector<TensorXd> trainable_params;
  for (auto& [name, t] : ckpt.params) {
    const bool update = trainable == Trainable::kAll || IsHeadParam(name);
    t.set_requires_grad(update);
    t.zero_grad();
    if (update) trainable_params.push_back(t);
  }
  AdamW optimizer(trainable_params, {learning_rate, tc.beta1, tc.beta2, tc.eps,
                                     tc.weight_decay});
  Trainer trainer(ckpt, split, trainable);

  TrainingLog log;
  log.learning_rate = learning_rate;
  log.best_val_acc = -1.0;
  ModelCheckpoint best = ckpt;
  int epochs_without_gain = 0;
  const std::size_t n = split.train.size();
  const std::size_t batch_size = static_cast<std::size_t>(tc.batch_size);

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(DeriveSeed(tc.seed, static_cast<std::uint64_t>(epoch)));
    rng.Shuffle(order);

    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t stop = std::min(n, start + batch_size);
        std::span<const std::size_t> batch(order.data() + start, stop - start);
        autodiff::TapeXd tape;
        TensorXd loss;
        {
          autodiff::TapeXd::Scope scope(tape);
          loss = trainer.BatchLoss(batch);
        }
        optimizer.ZeroGrad();
        tape.Backward(loss);
        optimizer.Step();
        loss_sum += loss.item() * static_cast<double>(batch.size());
      }
    } catch (const NumericError& e) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch) +
                          " (lr " + FormatDouble(learning_rate) + "): " + e.what());
    }
    const double train_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(train_loss)) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch) +
                          " (lr " + FormatDouble(learning_rate) + "): loss is NaN");
    }
    const double val_acc = trainer.ValidationAccuracy();
    log.epochs.push_back({epoch, train_loss, val_acc});
    if (val_acc > log.best_val_acc) {
      log.best_val_acc = val_acc;
      log.best_epoch = epoch;
      best = ckpt;
      epochs_without_gain = 0;
    } else if (++epochs_without_gain >= tc.patience) {
      break;
    }
  }

  Freeze(best);
  best.train_config = tc;
  best.head_trained = true;
  best.encoder_trained = best.encoder_trained || trainable == Trainable::kAll;
  return {std::move(best), std::move(log)};
}

TrainResult train(const ModelCheckpoint& init, const text::DatasetSplit& split,
                  const TrainConfig& tc, Trainable trainable) {
  tc.Validate();
  std::optional<TrainResult> best;
  std::vector<std::pair<double, double>> grid;
  for (double lr : tc.learning_rates) {
    TrainResult run = TrainWithLearningRate(init, split, tc, lr, trainable);
    grid.emplace_back(lr, run.log.best_val_acc);
    if (!best || run.log.best_val_acc > best->log.best_val_acc) best = std::move(run);
  }
  best->log.grid = std::move(grid);
  return std::move(*best);
}

TrainResult train(const ModelCheckpoint& init, const text::DatasetSplit& split,
                  const TrainConfig& tc) {
  return train(init, split, tc,
               init.config.fine_tune_encoder ? Trainable::kAll : Trainable::kHeadOnly);
}

void CopyEncoder(const ModelCheckpoint& source, ModelCheckpoint& target) {
  for (const auto& [name, t] : source.params) {
    if (IsHeadParam(name)) continue;
    target.at(name) = t.clone();
    target.at(name).set_requires_grad(false);
    target.at(name).zero_grad();
  }
}

namespace {

// Prefixes training failures with the variant being trained.
TrainResult TaggedTrain(const ModelCheckpoint& init, const text::DatasetSplit& split,
                        const TrainConfig& tc, Trainable trainable) {
  try {
    return train(init, split, tc, trainable);
  } catch (const TrainingError& e) {
    throw TrainingError(std::string(Name(init.variant)) + ": " + e.what());
  }
}

}  // namespace

Variants make_variants(const ModelConfig& config, const text::DatasetSplit& split,
                       const TrainConfig& tc, const VariantSeeds& seeds) {
  if (seeds.first_head == seeds.second_head && !seeds.allow_identical_heads) {
    throw ContractError("make_variants: FirstInit and SecondInit head seeds must differ");
  }
  Variants out;
  {
    ModelCheckpoint base =
        init_params(config, seeds.encoder, seeds.pretrain_head, Variant::kEncoderPretrain);
    TrainResult pre = TaggedTrain(base, split, tc, Trainable::kAll);
    out.pretrain = std::move(pre.checkpoint);
    out.pretrain_log = std::move(pre.log);
  }
  auto trained_head = [&](std::uint64_t head_seed, Variant variant,
                          const TrainConfig& run_tc) {
    ModelCheckpoint init = init_params(config, seeds.encoder, head_seed, variant);
    CopyEncoder(out.pretrain, init);
    init.encoder_trained = true;
    return TaggedTrain(init, split, run_tc,
                       config.fine_tune_encoder ? Trainable::kAll : Trainable::kHeadOnly);
  };
  TrainResult first = trained_head(seeds.first_head, Variant::kFirstInit, tc);
  TrainConfig second_tc = tc;
  if (!seeds.shared_shuffle_seed) second_tc.seed = DeriveSeed(tc.seed, "second_init_shuffle");
  TrainResult second = trained_head(seeds.second_head, Variant::kSecondInit, second_tc);
  out.first = std::move(first.checkpoint);
  out.first_log = std::move(first.log);
  out.second = std::move(second.checkpoint);
  out.second_log = std::move(second.log);

  out.rand = init_params(config, seeds.encoder, seeds.rand_head, Variant::kRandInit);
  CopyEncoder(out.first, out.rand);
  out.rand.encoder_trained = true;
  out.rand.head_trained = false;
  return out;
}

void WriteTrainingLog(const TrainingLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_loss,val_acc\n";
  for (const EpochRecord& r : log.epochs) {
    out << r.epoch << ',' << FormatDouble(r.train_loss) << ',' << FormatDouble(r.val_acc)
        << '\n';
  }
}

}  // namespace randcheck::model
