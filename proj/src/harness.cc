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

#include "randcheck/harness.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <system_error>
#include <thread>

#include "randcheck/csv.h"
#include "randcheck/errors.h"
#include "randcheck/format.h"
#include "randcheck/random.h"

namespace randcheck::harness {

namespace fs = std::filesystem;
using nlohmann::json;

void ParallelFor(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(work);
  for (std::thread& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

void WriteFileAtomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string MethodSpec::Label() const {
  std::string label(attribution::Tag(method));
  if (attribution::IsGradientMethod(method) && reduction == Reduction::kInputDotGrad) {
    label += "-IxG";
  }
  return label;
}

std::vector<MethodSpec> MethodSpecs(const EvalOptions& eval) {
  std::vector<MethodSpec> specs;
  for (Method m : eval.methods) {
    if (attribution::IsGradientMethod(m)) {
      for (Reduction r : eval.reductions) specs.push_back({m, r});
    } else {
      specs.push_back({m, Reduction::kNone});
    }
  }
  return specs;
}

namespace {

std::string Hex(std::uint64_t value) {
  static const char* kDigits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

json LogToJson(const model::TrainingLog& log) {
  json epochs = json::array();
  for (const model::EpochRecord& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_acc", e.val_acc}});
  }
  json grid = json::array();
  for (const auto& [lr, acc] : log.grid) grid.push_back({lr, acc});
  return {{"learning_rate", log.learning_rate},
          {"best_epoch", log.best_epoch},
          {"best_val_acc", log.best_val_acc},
          {"epochs", epochs},
          {"grid", grid}};
}

model::TrainingLog LogFromJson(const json& j) {
  model::TrainingLog log;
  log.learning_rate = j.at("learning_rate").get<double>();
  log.best_epoch = j.at("best_epoch").get<int>();
  log.best_val_acc = j.at("best_val_acc").get<double>();
  for (const json& e : j.at("epochs")) {
    log.epochs.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                          e.at("val_acc").get<double>()});
  }
  for (const json& g : j.at("grid")) log.grid.emplace_back(g[0].get<double>(), g[1].get<double>());
  return log;
}

std::string CheckpointFile(Variant v) { return std::string(model::Name(v)) + ".json"; }

}  // namespace

Experiment::Experiment(ExperimentConfig config, fs::path out_dir, int jobs)
    : config_(std::move(config)),
      seeds_(ResolveSeeds(config_.seeds)),
      out_dir_(std::move(out_dir)),
      jobs_(std::max(1, jobs)) {
  config_.train.seed = seeds_.shuffle;
}

const text::Corpus& Experiment::corpus() {
  if (!corpus_) {
    if (config_.corpus.path.empty()) {
      text::SyntheticSpec spec = config_.corpus.synthetic;
      spec.seed = DeriveSeed(seeds_.data, "corpus");
      corpus_ = text::generate_synthetic(spec);
    } else {
      corpus_ = text::load_corpus(config_.corpus.path, config_.corpus.format);
    }
    config_.model.classes = corpus_->class_count();
  }
  return *corpus_;
}

const text::Vocab& Experiment::vocab() {
  data();
  return *vocab_;
}

const text::DatasetSplit& Experiment::data() {
  if (!data_) {
    const text::Corpus& c = corpus();
    const std::uint64_t split_seed = DeriveSeed(seeds_.data, "split");
    const text::SplitIndices indices = text::split_dataset(
        c, config_.split.train_ratio, config_.split.test_ratio, config_.split.val_fraction,
        split_seed);
    const std::vector<std::string> train_texts = text::Texts(c, indices.train);
    vocab_ = text::Vocab::Build(train_texts, config_.model.max_seq_len, config_.vocab.min_freq,
                                static_cast<std::size_t>(config_.vocab.max_size));
    data_ = text::TokenizeSplit(c, indices, *vocab_, split_seed);
    config_.model.vocab_size = static_cast<int>(vocab_->size());
    if (config_.model.hidden_units < config_.model.classes) {
      throw ConfigError("model.hidden_units", "must be >= the number of classes");
    }
    if (config_.eval.eval_subsample_size > data_->test.size()) {
      throw ConfigError("eval.eval_subsample_size",
                        "exceeds the test set size " + std::to_string(data_->test.size()));
    }
  }
  return *data_;
}

std::uint64_t Experiment::TrainingKey() const {
  const json j = ToJson(config_);
  std::uint64_t h = Fnv1a("randcheck-training-v1");
  for (const char* section : {"corpus", "split", "vocab", "model", "train", "seeds"}) {
    h = Fnv1a(j.at(section).dump(), h);
  }
  return h;
}

const model::Variants& Experiment::variants() {
  if (variants_) return *variants_;
  const text::DatasetSplit& split = data();
  const fs::path dir = out_dir_ / "checkpoints";
  const fs::path manifest = dir / "manifest.json";
  const std::string key = Hex(TrainingKey());
  if (fs::exists(manifest)) {
    const json m = json::parse(ReadFile(manifest));
    if (m.value("training_key", "") == key) {
      model::Variants v;
      v.pretrain = model::LoadCheckpoint(dir / CheckpointFile(Variant::kEncoderPretrain));
      v.first = model::LoadCheckpoint(dir / CheckpointFile(Variant::kFirstInit));
      v.second = model::LoadCheckpoint(dir / CheckpointFile(Variant::kSecondInit));
      v.rand = model::LoadCheckpoint(dir / CheckpointFile(Variant::kRandInit));
      v.pretrain_log = LogFromJson(m.at("logs").at("EncoderPretrain"));
      v.first_log = LogFromJson(m.at("logs").at("FirstInit"));
      v.second_log = LogFromJson(m.at("logs").at("SecondInit"));
      variants_ = std::move(v);
      return *variants_;
    }
  }
  model::VariantSeeds vs;
  vs.encoder = seeds_.encoder;
  vs.pretrain_head = seeds_.pretrain_head;
  vs.first_head = seeds_.first_head;
  vs.second_head = seeds_.second_head;
  vs.rand_head = seeds_.rand_head;
  vs.shared_shuffle_seed = config_.seeds.shared_shuffle_seed;
  vs.allow_identical_heads = config_.seeds.allow_identical_heads;
  model::Variants v = model::make_variants(config_.model, split, config_.train, vs);

  fs::create_directories(dir);
  for (const model::ModelCheckpoint* c : {&v.pretrain, &v.first, &v.second, &v.rand}) {
    WriteFileAtomic(dir / CheckpointFile(c->variant), model::ToJson(*c).dump());
  }
  const fs::path logs = out_dir_ / "logs";
  fs::create_directories(logs);
  model::WriteTrainingLog(v.pretrain_log, logs / "EncoderPretrain.csv");
  model::WriteTrainingLog(v.first_log, logs / "FirstInit.csv");
  model::WriteTrainingLog(v.second_log, logs / "SecondInit.csv");
  json m = {{"training_key", key},
            {"logs",
             {{"EncoderPretrain", LogToJson(v.pretrain_log)},
              {"FirstInit", LogToJson(v.first_log)},
              {"SecondInit", LogToJson(v.second_log)}}}};
  WriteFileAtomic(manifest, m.dump(2) + "\n");
  variants_ = std::move(v);
  return *variants_;
}

const model::ModelCheckpoint& Experiment::checkpoint(Variant variant) {
  const model::Variants& v = variants();
  switch (variant) {
    case Variant::kEncoderPretrain:
      return v.pretrain;
    case Variant::kFirstInit:
      return v.first;
    case Variant::kSecondInit:
      return v.second;
    case Variant::kRandInit:
      return v.rand;
  }
  throw ContractError("unknown variant");
}

const std::vector<std::size_t>& Experiment::eval_indices() {
  if (!eval_indices_) {
    const std::size_t n = data().test.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(DeriveSeed(seeds_.data, "eval_subsample"));
    rng.Shuffle(idx);
    idx.resize(config_.eval.eval_subsample_size);
    std::sort(idx.begin(), idx.end());
    eval_indices_ = std::move(idx);
  }
  return *eval_indices_;
}

const std::vector<text::TokenizedDoc>& Experiment::eval_docs() {
  if (!eval_docs_) {
    std::vector<text::TokenizedDoc> docs;
    for (std::size_t i : eval_indices()) docs.push_back(data().test[i]);
    eval_docs_ = std::move(docs);
  }
  return *eval_docs_;
}

std::uint64_t Experiment::MethodSeed(Method method, const std::string& doc_id) const {
  return DeriveSeed(seeds_.methods, std::string(attribution::Tag(method)) + "/" + doc_id);
}

const attribution::SigmaSelection& Experiment::sg_sigma() {
  if (sigma_) return *sigma_;
  const model::ModelCheckpoint& first = checkpoint(Variant::kFirstInit);
  const std::vector<text::TokenizedDoc>& docs = eval_docs();
  std::size_t n = config_.eval.sg_selection_docs;
  if (n == 0 || n > docs.size()) n = docs.size();
  const Reduction reduction = config_.eval.reductions.front();

  json key = {{"checkpoint", Hex(first.ContentHash())},
              {"grid", config_.eval.sg_sigma_grid},
              {"n_iter", config_.eval.sg_n_iter},
              {"docs", n},
              {"reduction", std::string(attribution::Name(reduction))},
              {"target", std::string(attribution::Name(config_.eval.target))},
              {"methods_seed", seeds_.methods}};
  const fs::path path = out_dir_ / "cache" / ("sg_sigma_" + Hex(Fnv1a(key.dump())) + ".json");
  if (fs::exists(path)) {
    const json j = json::parse(ReadFile(path));
    attribution::SigmaSelection s;
    s.sigma = j.at("sigma").get<double>();
    s.mean_infidelity = j.at("mean_infidelity").get<std::vector<double>>();
    sigma_ = std::move(s);
    return *sigma_;
  }

  // Same rule as attribution::select_sg_sigma, spread over documents.
  const std::vector<double>& grid = config_.eval.sg_sigma_grid;
  attribution::SigmaSelection best;
  double best_value = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<metrics::InfidelityResult> results(n);
    ParallelFor(n, jobs_, [&](std::size_t i) {
      const text::TokenizedDoc& doc = docs[i];
      const AttributionOutput att = attribution::Reduced(
          attribution::smoothgrad(first, doc, grid[g], config_.eval.sg_n_iter,
                                  MethodSeed(Method::kSmoothGrad, doc.doc_id),
                                  config_.eval.target),
          reduction, model::Embed(first, doc.ids));
      results[i] = metrics::infidelity(first, doc, att);
    });
    const double value = metrics::mean_infidelity(results);
    best.mean_infidelity.push_back(value);
    if (g == 0 || value < best_value || (value == best_value && grid[g] < best.sigma)) {
      best_value = value;
      best.sigma = grid[g];
    }
  }
  WriteFileAtomic(path, json({{"sigma", best.sigma}, {"mean_infidelity", best.mean_infidelity}})
                            .dump() + "\n");
  sigma_ = std::move(best);
  return *sigma_;
}

AttributionOutput Experiment::Compute(const model::ModelCheckpoint& ckpt,
                                      const text::TokenizedDoc& doc, const MethodSpec& spec,
                                      double sigma) {
  const attribution::Target target = config_.eval.target;
  switch (spec.method) {
    case Method::kVanilla:
      return attribution::Reduced(attribution::vanilla_saliency(ckpt, doc, target),
                                  spec.reduction, model::Embed(ckpt, doc.ids));
    case Method::kSmoothGrad:
      return attribution::Reduced(
          attribution::smoothgrad(ckpt, doc, sigma, config_.eval.sg_n_iter,
                                  MethodSeed(Method::kSmoothGrad, doc.doc_id), target),
          spec.reduction, model::Embed(ckpt, doc.ids));
    case Method::kIntegratedGradients:
      return attribution::Reduced(
          attribution::integrated_gradients(ckpt, doc, config_.eval.ig_steps, target),
          spec.reduction, model::Embed(ckpt, doc.ids));
    case Method::kKernelShap: {
      const std::size_t budget = config_.eval.shap_coalitions > 0
                                     ? config_.eval.shap_coalitions
                                     : attribution::DefaultCoalitionBudget(static_cast<int>(doc.length()));
      return attribution::kernel_shap(ckpt, doc, budget,
                                      MethodSeed(Method::kKernelShap, doc.doc_id), target);
    }
    case Method::kRandom: {
      AttributionOutput out =
          attribution::random_attribution(doc, MethodSeed(Method::kRandom, doc.doc_id));
      out.variant = std::string(model::Name(ckpt.variant));
      return out;
    }
  }
  throw ContractError("unknown method");
}

const std::vector<AttributionOutput>& Experiment::attributions(Variant variant,
                                                               const MethodSpec& spec) {
  const std::string name = std::string(model::Name(variant)) + "_" + spec.Label();
  if (auto it = attributions_.find(name); it != attributions_.end()) return it->second;

  const model::ModelCheckpoint& ckpt = checkpoint(variant);
  const std::vector<text::TokenizedDoc>& docs = eval_docs();
  const double sigma = spec.method == Method::kSmoothGrad ? sg_sigma().sigma : 0.0;

  json key = {{"checkpoint", Hex(ckpt.ContentHash())},
              {"method", spec.Label()},
              {"target", std::string(attribution::Name(config_.eval.target))},
              {"methods_seed", seeds_.methods}};
  if (spec.method == Method::kSmoothGrad) {
    key["sigma"] = sigma;
    key["n_iter"] = config_.eval.sg_n_iter;
  }
  if (spec.method == Method::kIntegratedGradients) key["steps"] = config_.eval.ig_steps;
  if (spec.method == Method::kKernelShap) key["coalitions"] = config_.eval.shap_coalitions;
  std::uint64_t h = Fnv1a(key.dump());
  for (const text::TokenizedDoc& d : docs) {
    h = Fnv1a(d.doc_id, h);
    for (int id : d.ids) h = Fnv1a(std::to_string(id) + ",", h);
  }
  const fs::path path = out_dir_ / "cache" / "attributions" / (name + "_" + Hex(h) + ".jsonl");

  std::vector<AttributionOutput> out(docs.size());
  bool loaded = false;
  if (fs::exists(path)) {
    std::istringstream in(ReadFile(path));
    std::string line;
    std::size_t i = 0;
    while (std::getline(in, line) && i < docs.size()) {
      out[i] = attribution::AttributionFromJson(json::parse(line));
      if (out[i].doc_id != docs[i].doc_id) break;
      ++i;
    }
    loaded = i == docs.size();
  }
  if (!loaded) {
    ParallelFor(docs.size(), jobs_,
                [&](std::size_t i) { out[i] = Compute(ckpt, docs[i], spec, sigma); });
    std::string text;
    for (const AttributionOutput& a : out) text += attribution::ToJson(a).dump() + "\n";
    WriteFileAtomic(path, text);
  }
  return attributions_.emplace(name, std::move(out)).first->second;
}

const std::vector<metrics::InfidelityResult>& Experiment::infidelities(Variant variant,
                                                                       const MethodSpec& spec) {
  const std::string name = std::string(model::Name(variant)) + "_" + spec.Label();
  if (auto it = infidelities_.find(name); it != infidelities_.end()) return it->second;
  const std::vector<AttributionOutput>& atts = attributions(variant, spec);
  const model::ModelCheckpoint& ckpt = checkpoint(variant);
  const std::vector<text::TokenizedDoc>& docs = eval_docs();
  std::vector<metrics::InfidelityResult> out(docs.size());
  ParallelFor(docs.size(), jobs_, [&](std::size_t i) {
    out[i] = metrics::infidelity(ckpt, docs[i], atts[i]);
    out[i].method = spec.Label();
  });
  return infidelities_.emplace(name, std::move(out)).first->second;
}

std::vector<UnitsCount> within_units_count(const CellTable& a, const CellTable& b,
                                           double units) {
  if (!(units >= 0.0)) throw ContractError("within_units_count: units must be >= 0");
  std::vector<UnitsCount> counts;
  if (a.size() != b.size()) throw ContractError("within_units_count: method sets differ");
  for (const auto& [method, cells] : a) {
    auto other = b.find(method);
    if (other == b.end()) {
      throw ContractError("within_units_count: method '" + method + "' missing from second table");
    }
    if (other->second.size() != cells.size()) {
      throw ContractError("within_units_count: cell sets differ for '" + method + "'");
    }
    UnitsCount c{method, 0, cells.size()};
    for (const auto& [cell, value] : cells) {
      auto match = other->second.find(cell);
      if (match == other->second.end()) {
        throw ContractError("within_units_count: cell '" + cell + "' missing for '" + method + "'");
      }
      if (std::abs(value - match->second) <= units) ++c.count;
    }
    counts.push_back(std::move(c));
  }
  return counts;
}

CellTable ReadCellTable(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(0, "cannot read " + path.string());
  csv::Reader reader(in, ',');
  std::optional<std::vector<std::string>> header;
  try {
    header = reader.Next();
  } catch (const std::runtime_error& e) {
    throw IngestionError(1, e.what());
  }
  if (!header || *header != std::vector<std::string>{"method", "cell", "value"}) {
    throw IngestionError(1, path.string() + ": expected header method,cell,value");
  }
  CellTable table;
  while (true) {
    std::optional<std::vector<std::string>> row;
    try {
      row = reader.Next();
    } catch (const std::runtime_error& e) {
      throw IngestionError(reader.line(), e.what());
    }
    if (!row) break;
    if (row->size() == 1 && row->front().empty()) continue;
    if (row->size() != 3) throw IngestionError(reader.line(), "expected 3 fields");
    const std::string& text = (*row)[2];
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(value)) {
      throw IngestionError(reader.line(), "value '" + text + "' is not a number");
    }
    if (!table[(*row)[0]].emplace((*row)[1], value).second) {
      throw IngestionError(reader.line(), "duplicate cell " + (*row)[0] + "/" + (*row)[1]);
    }
  }
  return table;
}

CellTable JaccardTable::AsCells() const {
  CellTable table;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (std::size_t k = 0; k < k_percent.size(); ++k) {
      table[methods[m]]["K=" + FormatDouble(k_percent[k])] = 100.0 * cells[m][k];
    }
  }
  return table;
}

namespace {

std::string JaccardMetric(double k) { return "jaccard@" + FormatDouble(k); }

InfidelityTable BuildInfidelity(Experiment& e, Variant variant,
                                const std::vector<MethodSpec>& specs,
                                std::vector<PerDocRow>& per_doc) {
  InfidelityTable table;
  table.variant = std::string(model::Name(variant));
  for (const MethodSpec& spec : specs) {
    const std::vector<metrics::InfidelityResult>& results = e.infidelities(variant, spec);
    table.methods.push_back(spec.Label());
    table.summaries.push_back(metrics::Summarize(results));
    for (const metrics::InfidelityResult& r : results) {
      per_doc.push_back({r.doc_id, table.variant, spec.Label(), "infidelity", r.dropped_fraction});
    }
  }
  return table;
}

// Mean Jaccard@K% between two variants over `agreeing` eval positions.
JaccardTable BuildJaccard(Experiment& e, Variant a, Variant b,
                          const std::vector<MethodSpec>& specs,
                          const std::vector<std::size_t>& agreeing,
                          std::vector<PerDocRow>& per_doc) {
  JaccardTable table;
  table.name = std::string(model::Name(a)) + "|" + std::string(model::Name(b));
  table.k_percent = e.config().eval.k_percent;
  table.documents = agreeing.size();
  for (const MethodSpec& spec : specs) {
    // Random scores do not depend on the model, so comparing them is void.
    if (spec.method == Method::kRandom) continue;
    const std::vector<AttributionOutput>& atts_a = e.attributions(a, spec);
    const std::vector<AttributionOutput>& atts_b = e.attributions(b, spec);
    std::vector<double> means;
    for (double k : table.k_percent) {
      double sum = 0.0;
      for (std::size_t i : agreeing) {
        const metrics::JaccardResult r = metrics::jaccard_at_k(atts_a[i], atts_b[i], k);
        sum += r.value;
        per_doc.push_back({r.doc_id, table.name, spec.Label(), JaccardMetric(k), r.value});
      }
      means.push_back(agreeing.empty() ? std::nan("") : sum / static_cast<double>(agreeing.size()));
    }
    table.methods.push_back(spec.Label());
    table.cells.push_back(std::move(means));
  }
  return table;
}

std::vector<std::size_t> Agreeing(const model::ModelCheckpoint& a, const model::ModelCheckpoint& b,
                                  const std::vector<text::TokenizedDoc>& docs) {
  return metrics::prediction_overlap(a, b, docs).agreeing;
}

}  // namespace

DiffInitSection run_test_diffinit(Experiment& e) {
  const std::vector<MethodSpec> specs = MethodSpecs(e.config().eval);
  const model::ModelCheckpoint& first = e.checkpoint(Variant::kFirstInit);
  const model::ModelCheckpoint& second = e.checkpoint(Variant::kSecondInit);
  const std::vector<text::TokenizedDoc>& test = e.data().test;
  const std::vector<text::TokenizedDoc>& docs = e.eval_docs();

  DiffInitSection s;
  s.accuracy_first = metrics::accuracy(first, test);
  s.accuracy_second = metrics::accuracy(second, test);
  s.overlap = metrics::prediction_overlap(first, second, test).fraction;
  s.eval_documents = docs.size();
  const std::vector<std::size_t> agreeing = Agreeing(first, second, docs);
  s.agreeing_documents = agreeing.size();
  s.infidelity_first = BuildInfidelity(e, Variant::kFirstInit, specs, s.per_doc);
  s.infidelity_second = BuildInfidelity(e, Variant::kSecondInit, specs, s.per_doc);
  s.jaccard = BuildJaccard(e, Variant::kFirstInit, Variant::kSecondInit, specs, agreeing, s.per_doc);
  return s;
}

UntrainedSection run_test_untrained(Experiment& e) {
  const std::vector<MethodSpec> specs = MethodSpecs(e.config().eval);
  const model::ModelCheckpoint& first = e.checkpoint(Variant::kFirstInit);
  const model::ModelCheckpoint& rand = e.checkpoint(Variant::kRandInit);
  const std::vector<text::TokenizedDoc>& test = e.data().test;
  const std::vector<text::TokenizedDoc>& docs = e.eval_docs();

  UntrainedSection s;
  s.accuracy_first = metrics::accuracy(first, test);
  s.accuracy_rand = metrics::accuracy(rand, test);
  s.overlap = metrics::prediction_overlap(first, rand, test).fraction;
  s.eval_documents = docs.size();
  const int class0 = model::predict(rand, docs.front());
  s.constant_prediction = std::all_of(docs.begin(), docs.end(), [&](const text::TokenizedDoc& d) {
    return model::predict(rand, d) == class0;
  });
  const std::vector<std::size_t> agreeing = Agreeing(first, rand, docs);
  s.agreeing_documents = agreeing.size();
  s.infidelity_first = BuildInfidelity(e, Variant::kFirstInit, specs, s.per_doc);
  s.infidelity_rand = BuildInfidelity(e, Variant::kRandInit, specs, s.per_doc);
  s.jaccard = BuildJaccard(e, Variant::kFirstInit, Variant::kRandInit, specs, agreeing, s.per_doc);
  return s;
}

}  // namespace randcheck::harness
