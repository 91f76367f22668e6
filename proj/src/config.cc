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

#include "randcheck/config.h"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "randcheck/errors.h"
#include "randcheck/random.h"

namespace randcheck::harness {

using attribution::Method;
using attribution::Reduction;
using nlohmann::json;

namespace {

std::string Join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void Fail(const std::string& path, const std::string& what) {
  throw ConfigError(path, what);
}

void Read(const json& v, const std::string& path, double& out) {
  if (!v.is_number()) Fail(path, "expected a number");
  out = v.get<double>();
  if (!std::isfinite(out)) Fail(path, "must be finite");
}

void Read(const json& v, const std::string& path, int& out) {
  if (!v.is_number_integer()) Fail(path, "expected an integer");
  const auto value = v.get<std::int64_t>();
  if (value < INT32_MIN || value > INT32_MAX) Fail(path, "integer out of range");
  out = static_cast<int>(value);
}

void Read(const json& v, const std::string& path, std::uint64_t& out) {
  if (v.is_number_unsigned()) {
    out = v.get<std::uint64_t>();
    return;
  }
  if (v.is_number_integer()) {
    // Values built in code are stored signed even when non-negative.
    const auto value = v.get<std::int64_t>();
    if (value < 0) Fail(path, "must be non-negative");
    out = static_cast<std::uint64_t>(value);
    return;
  }
  Fail(path, "expected a non-negative integer");
}

void Read(const json& v, const std::string& path, bool& out) {
  if (!v.is_boolean()) Fail(path, "expected true or false");
  out = v.get<bool>();
}

void Read(const json& v, const std::string& path, std::string& out) {
  if (!v.is_string()) Fail(path, "expected a string");
  out = v.get<std::string>();
}

void Read(const json& v, const std::string& path, std::optional<std::uint64_t>& out) {
  if (v.is_null()) {
    out.reset();
    return;
  }
  std::uint64_t value = 0;
  Read(v, path, value);
  out = value;
}

template <typename T>
void Read(const json& v, const std::string& path, std::vector<T>& out) {
  if (!v.is_array()) Fail(path, "expected an array");
  out.clear();
  for (std::size_t i = 0; i < v.size(); ++i) {
    T item{};
    Read(v[i], path + "[" + std::to_string(i) + "]", item);
    out.push_back(item);
  }
}

// Enum fields given as strings and parsed by `parse`.
template <typename E, typename Parse>
void ReadEnum(const json& v, const std::string& path, E& out, Parse parse) {
  std::string name;
  Read(v, path, name);
  try {
    out = parse(name);
  } catch (const ContractError& e) {
    Fail(path, e.what());
  }
}

// One JSON object; tracks which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) Fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <typename T>
  void Get(const std::string& key, T& out) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) Read(*it, Join(path_, key), out);
  }

  template <typename E, typename Parse>
  void GetEnum(const std::string& key, E& out, Parse parse) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) ReadEnum(*it, Join(path_, key), out, parse);
  }

  template <typename E, typename Parse>
  void GetEnumList(const std::string& key, std::vector<E>& out, Parse parse) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    const std::string path = Join(path_, key);
    if (!it->is_array()) Fail(path, "expected an array");
    out.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      E value{};
      ReadEnum((*it)[i], path + "[" + std::to_string(i) + "]", value, parse);
      out.push_back(value);
    }
  }

  // Empty object when absent.
  Section Child(const std::string& key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    auto it = j_.find(key);
    return Section(it == j_.end() ? kEmpty : *it, Join(path_, key));
  }

  void Done() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) Fail(Join(path_, key), "unknown key");
    }
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void Require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) Fail(path, what);
}

json OptionalSeed(const std::optional<std::uint64_t>& seed) {
  return seed ? json(*seed) : json(nullptr);
}

const std::map<std::string, std::string>& Descriptions() {
  static const std::map<std::string, std::string> kText = {
      {"corpus.path", "CSV/TSV file with text and label columns; empty uses the synthetic generator"},
      {"corpus.format", "csv or tsv"},
      {"corpus.synthetic.n_docs", "number of generated documents"},
      {"corpus.synthetic.classes", "number of classes K"},
      {"corpus.synthetic.vocab_size", "filler plus keyword vocabulary size"},
      {"corpus.synthetic.min_len", "shortest document in tokens"},
      {"corpus.synthetic.max_len", "longest document in tokens"},
      {"corpus.synthetic.keyword_strength", "0 = keywords independent of label, 1 = own-class keywords only"},
      {"corpus.synthetic.min_keywords", "fewest planted keywords per document"},
      {"corpus.synthetic.max_keywords", "most planted keywords per document; 0 = a third of the length"},
      {"split.train_ratio", "share of documents used for training plus validation"},
      {"split.test_ratio", "share of documents held out for testing"},
      {"split.val_fraction", "share of the training part used for validation"},
      {"vocab.min_freq", "minimum training-split frequency for a vocabulary entry"},
      {"vocab.max_size", "vocabulary cap including <pad> and <unk>"},
      {"model.embed_dim", "embedding width D"},
      {"model.encoder_type", "none or self_attention_block"},
      {"model.encoder_dim", "query/key/value width of the attention block"},
      {"model.hidden_units", "width of the first fully connected layer"},
      {"model.max_seq_len", "documents are truncated to this many tokens"},
      {"model.fine_tune_encoder", "train encoder parameters together with the head"},
      {"train.learning_rates", "grid searched by validation accuracy"},
      {"train.max_epochs", "epoch limit"},
      {"train.patience", "epochs without improvement before stopping"},
      {"train.batch_size", "documents per optimizer step"},
      {"train.beta1", "AdamW first-moment decay"},
      {"train.beta2", "AdamW second-moment decay"},
      {"train.eps", "AdamW denominator offset"},
      {"train.weight_decay", "AdamW decoupled weight decay"},
      {"seeds.global", "root seed; every other seed derives from it"},
      {"seeds.data", "corpus generation, split and evaluation subsample"},
      {"seeds.encoder", "encoder and embedding initialization"},
      {"seeds.pretrain_head", "head used while producing the shared encoder"},
      {"seeds.first_head", "FirstInit head initialization"},
      {"seeds.second_head", "SecondInit head initialization"},
      {"seeds.rand_head", "RandInit head initialization"},
      {"seeds.shuffle", "per-epoch shuffle order"},
      {"seeds.methods", "SmoothGrad noise, KernelSHAP sampling and random scores"},
      {"seeds.shared_shuffle_seed", "train FirstInit and SecondInit with the same shuffle order"},
      {"seeds.allow_identical_heads", "debug override permitting first_head == second_head"},
      {"eval.eval_subsample_size", "test documents evaluated"},
      {"eval.k_percent", "K values for Jaccard@K%"},
      {"eval.methods", "subset of VN, SG, IG, SHP, RND"},
      {"eval.reductions", "l2 and/or input_dot_grad for gradient methods"},
      {"eval.sg_sigma_grid", "SmoothGrad noise levels tried on FirstInit"},
      {"eval.sg_n_iter", "SmoothGrad samples per document"},
      {"eval.sg_selection_docs", "documents used to pick sigma; 0 = whole subsample"},
      {"eval.ig_steps", "integrated gradients quadrature points"},
      {"eval.shap_coalitions", "KernelSHAP coalitions; 0 = 2L + 2048"},
      {"eval.target", "logit or probability"},
      {"eval.within_units", "tolerance for the within-units comparison"},
  };
  return kText;
}

void Flatten(const json& j, const std::string& path, std::vector<ConfigKey>& out) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) Flatten(value, Join(path, key), out);
    return;
  }
  const auto& text = Descriptions();
  auto it = text.find(path);
  out.push_back({path, j.is_null() ? "derived" : j.dump(), it == text.end() ? "" : it->second});
}

}  // namespace

ExperimentConfig DefaultConfig() { return ExperimentConfig{}; }

json ToJson(const ExperimentConfig& c) {
  const text::SyntheticSpec& s = c.corpus.synthetic;
  json methods = json::array();
  for (Method m : c.eval.methods) methods.push_back(std::string(attribution::Tag(m)));
  json reductions = json::array();
  for (Reduction r : c.eval.reductions) reductions.push_back(std::string(attribution::Name(r)));
  return {
      {"corpus",
       {{"path", c.corpus.path},
        {"format", c.corpus.format == text::CorpusFormat::kCsv ? "csv" : "tsv"},
        {"synthetic",
         {{"n_docs", s.n_docs},
          {"classes", s.classes},
          {"vocab_size", s.vocab_size},
          {"min_len", s.min_len},
          {"max_len", s.max_len},
          {"keyword_strength", s.keyword_strength},
          {"min_keywords", s.min_keywords},
          {"max_keywords", s.max_keywords}}}}},
      {"split",
       {{"train_ratio", c.split.train_ratio},
        {"test_ratio", c.split.test_ratio},
        {"val_fraction", c.split.val_fraction}}},
      {"vocab", {{"min_freq", c.vocab.min_freq}, {"max_size", c.vocab.max_size}}},
      {"model",
       {{"embed_dim", c.model.embed_dim},
        {"encoder_type", std::string(model::Name(c.model.encoder_type))},
        {"encoder_dim", c.model.encoder_dim},
        {"hidden_units", c.model.hidden_units},
        {"max_seq_len", c.model.max_seq_len},
        {"fine_tune_encoder", c.model.fine_tune_encoder}}},
      {"train",
       {{"learning_rates", c.train.learning_rates},
        {"max_epochs", c.train.max_epochs},
        {"patience", c.train.patience},
        {"batch_size", c.train.batch_size},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"eps", c.train.eps},
        {"weight_decay", c.train.weight_decay}}},
      {"seeds",
       {{"global", c.seeds.global},
        {"data", OptionalSeed(c.seeds.data)},
        {"encoder", OptionalSeed(c.seeds.encoder)},
        {"pretrain_head", OptionalSeed(c.seeds.pretrain_head)},
        {"first_head", OptionalSeed(c.seeds.first_head)},
        {"second_head", OptionalSeed(c.seeds.second_head)},
        {"rand_head", OptionalSeed(c.seeds.rand_head)},
        {"shuffle", OptionalSeed(c.seeds.shuffle)},
        {"methods", OptionalSeed(c.seeds.methods)},
        {"shared_shuffle_seed", c.seeds.shared_shuffle_seed},
        {"allow_identical_heads", c.seeds.allow_identical_heads}}},
      {"eval",
       {{"eval_subsample_size", c.eval.eval_subsample_size},
        {"k_percent", c.eval.k_percent},
        {"methods", methods},
        {"reductions", reductions},
        {"sg_sigma_grid", c.eval.sg_sigma_grid},
        {"sg_n_iter", c.eval.sg_n_iter},
        {"sg_selection_docs", c.eval.sg_selection_docs},
        {"ig_steps", c.eval.ig_steps},
        {"shap_coalitions", c.eval.shap_coalitions},
        {"target", std::string(attribution::Name(c.eval.target))},
        {"within_units", c.eval.within_units}}},
  };
}

ExperimentConfig ParseConfig(const json& j) {
  ExperimentConfig c = DefaultConfig();
  Section root(j, "");

  {
    Section corpus = root.Child("corpus");
    corpus.Get("path", c.corpus.path);
    corpus.GetEnum("format", c.corpus.format, text::ParseCorpusFormat);
    Section syn = corpus.Child("synthetic");
    text::SyntheticSpec& s = c.corpus.synthetic;
    syn.Get("n_docs", s.n_docs);
    syn.Get("classes", s.classes);
    syn.Get("vocab_size", s.vocab_size);
    syn.Get("min_len", s.min_len);
    syn.Get("max_len", s.max_len);
    syn.Get("keyword_strength", s.keyword_strength);
    syn.Get("min_keywords", s.min_keywords);
    syn.Get("max_keywords", s.max_keywords);
    syn.Done();
    corpus.Done();
    Require(s.classes >= 2, "corpus.synthetic.classes", "must be at least 2");
    Require(s.n_docs >= s.classes, "corpus.synthetic.n_docs", "need at least one document per class");
    Require(s.vocab_size > 10 * s.classes, "corpus.synthetic.vocab_size", "must exceed 10 * classes");
    Require(s.min_len >= 4, "corpus.synthetic.min_len", "must be at least 4");
    Require(s.max_len >= s.min_len, "corpus.synthetic.max_len", "must be >= min_len");
    Require(s.keyword_strength >= 0.0 && s.keyword_strength <= 1.0,
            "corpus.synthetic.keyword_strength", "must lie in [0, 1]");
    Require(s.min_keywords >= 1 && s.min_keywords <= s.min_len, "corpus.synthetic.min_keywords",
            "must lie in [1, min_len]");
    Require(s.max_keywords >= 0, "corpus.synthetic.max_keywords", "must be >= 0");
  }
  {
    Section split = root.Child("split");
    split.Get("train_ratio", c.split.train_ratio);
    split.Get("test_ratio", c.split.test_ratio);
    split.Get("val_fraction", c.split.val_fraction);
    split.Done();
    Require(c.split.test_ratio > 0.0 && c.split.test_ratio < 1.0, "split.test_ratio",
            "must lie in (0, 1)");
    Require(c.split.train_ratio > 0.0 && c.split.train_ratio < 1.0, "split.train_ratio",
            "must lie in (0, 1)");
    Require(std::abs(c.split.train_ratio + c.split.test_ratio - 1.0) < 1e-9, "split.train_ratio",
            "train_ratio + test_ratio must equal 1");
    Require(c.split.val_fraction > 0.0 && c.split.val_fraction < 1.0, "split.val_fraction",
            "must lie in (0, 1)");
  }
  {
    Section vocab = root.Child("vocab");
    vocab.Get("min_freq", c.vocab.min_freq);
    vocab.Get("max_size", c.vocab.max_size);
    vocab.Done();
    Require(c.vocab.min_freq >= 1, "vocab.min_freq", "must be >= 1");
    Require(c.vocab.max_size >= 3, "vocab.max_size", "must be >= 3");
  }
  {
    Section m = root.Child("model");
    m.Get("embed_dim", c.model.embed_dim);
    m.GetEnum("encoder_type", c.model.encoder_type, model::ParseEncoderType);
    m.Get("encoder_dim", c.model.encoder_dim);
    m.Get("hidden_units", c.model.hidden_units);
    m.Get("max_seq_len", c.model.max_seq_len);
    m.Get("fine_tune_encoder", c.model.fine_tune_encoder);
    m.Done();
    Require(c.model.embed_dim > 0, "model.embed_dim", "must be positive");
    Require(c.model.encoder_dim > 0, "model.encoder_dim", "must be positive");
    Require(c.model.max_seq_len > 0, "model.max_seq_len", "must be positive");
  }
  {
    Section t = root.Child("train");
    t.Get("learning_rates", c.train.learning_rates);
    t.Get("max_epochs", c.train.max_epochs);
    t.Get("patience", c.train.patience);
    t.Get("batch_size", c.train.batch_size);
    t.Get("beta1", c.train.beta1);
    t.Get("beta2", c.train.beta2);
    t.Get("eps", c.train.eps);
    t.Get("weight_decay", c.train.weight_decay);
    t.Done();
    Require(!c.train.learning_rates.empty(), "train.learning_rates", "must not be empty");
    for (std::size_t i = 0; i < c.train.learning_rates.size(); ++i) {
      Require(c.train.learning_rates[i] > 0.0, "train.learning_rates[" + std::to_string(i) + "]",
              "must be positive");
    }
    Require(c.train.max_epochs >= 1, "train.max_epochs", "must be >= 1");
    Require(c.train.patience >= 1, "train.patience", "must be >= 1");
    Require(c.train.patience < c.train.max_epochs, "train.patience", "must be < max_epochs");
    Require(c.train.batch_size >= 1, "train.batch_size", "must be >= 1");
    Require(c.train.beta1 >= 0.0 && c.train.beta1 < 1.0, "train.beta1", "must lie in [0, 1)");
    Require(c.train.beta2 >= 0.0 && c.train.beta2 < 1.0, "train.beta2", "must lie in [0, 1)");
    Require(c.train.eps > 0.0, "train.eps", "must be positive");
    Require(c.train.weight_decay >= 0.0, "train.weight_decay", "must be >= 0");
  }
  {
    Section s = root.Child("seeds");
    s.Get("global", c.seeds.global);
    s.Get("data", c.seeds.data);
    s.Get("encoder", c.seeds.encoder);
    s.Get("pretrain_head", c.seeds.pretrain_head);
    s.Get("first_head", c.seeds.first_head);
    s.Get("second_head", c.seeds.second_head);
    s.Get("rand_head", c.seeds.rand_head);
    s.Get("shuffle", c.seeds.shuffle);
    s.Get("methods", c.seeds.methods);
    s.Get("shared_shuffle_seed", c.seeds.shared_shuffle_seed);
    s.Get("allow_identical_heads", c.seeds.allow_identical_heads);
    s.Done();
    const ResolvedSeeds r = ResolveSeeds(c.seeds);
    Require(r.first_head != r.second_head || c.seeds.allow_identical_heads, "seeds.second_head",
            "must differ from seeds.first_head unless allow_identical_heads is set");
  }
  {
    Section e = root.Child("eval");
    e.Get("eval_subsample_size", c.eval.eval_subsample_size);
    e.Get("k_percent", c.eval.k_percent);
    e.GetEnumList("methods", c.eval.methods, attribution::ParseMethod);
    e.GetEnumList("reductions", c.eval.reductions, attribution::ParseReduction);
    e.Get("sg_sigma_grid", c.eval.sg_sigma_grid);
    e.Get("sg_n_iter", c.eval.sg_n_iter);
    e.Get("sg_selection_docs", c.eval.sg_selection_docs);
    e.Get("ig_steps", c.eval.ig_steps);
    e.Get("shap_coalitions", c.eval.shap_coalitions);
    e.GetEnum("target", c.eval.target, attribution::ParseTarget);
    e.Get("within_units", c.eval.within_units);
    e.Done();
    Require(c.eval.eval_subsample_size >= 1, "eval.eval_subsample_size", "must be >= 1");
    Require(!c.eval.k_percent.empty(), "eval.k_percent", "must not be empty");
    for (std::size_t i = 0; i < c.eval.k_percent.size(); ++i) {
      const double k = c.eval.k_percent[i];
      Require(k > 0.0 && k <= 100.0, "eval.k_percent[" + std::to_string(i) + "]",
              "must lie in (0, 100]");
    }
    Require(!c.eval.methods.empty(), "eval.methods", "must not be empty");
    Require(!c.eval.reductions.empty(), "eval.reductions", "must not be empty");
    for (std::size_t i = 0; i < c.eval.reductions.size(); ++i) {
      Require(c.eval.reductions[i] != Reduction::kNone,
              "eval.reductions[" + std::to_string(i) + "]", "must be l2 or input_dot_grad");
    }
    Require(!c.eval.sg_sigma_grid.empty(), "eval.sg_sigma_grid", "must not be empty");
    for (std::size_t i = 0; i < c.eval.sg_sigma_grid.size(); ++i) {
      Require(c.eval.sg_sigma_grid[i] >= 0.0, "eval.sg_sigma_grid[" + std::to_string(i) + "]",
              "must be >= 0");
    }
    Require(c.eval.sg_n_iter >= 1, "eval.sg_n_iter", "must be >= 1");
    Require(c.eval.ig_steps >= 1, "eval.ig_steps", "must be >= 1");
    Require(c.eval.within_units >= 0.0, "eval.within_units", "must be >= 0");
  }
  root.Done();
  c.model.classes = c.corpus.synthetic.classes;
  return c;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<file>", "cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return ParseConfig(j);
}

ResolvedSeeds ResolveSeeds(const SeedOptions& s) {
  auto pick = [&](const std::optional<std::uint64_t>& explicit_seed, std::string_view name) {
    return explicit_seed ? *explicit_seed : DeriveSeed(s.global, name);
  };
  ResolvedSeeds r;
  r.data = pick(s.data, "data");
  r.encoder = pick(s.encoder, "encoder");
  r.pretrain_head = pick(s.pretrain_head, "pretrain_head");
  r.first_head = pick(s.first_head, "first_head");
  r.second_head = pick(s.second_head, "second_head");
  r.rand_head = pick(s.rand_head, "rand_head");
  r.shuffle = pick(s.shuffle, "shuffle");
  r.methods = pick(s.methods, "methods");
  return r;
}

std::vector<ConfigKey> ConfigSchema() {
  std::vector<ConfigKey> keys;
  Flatten(ToJson(DefaultConfig()), "", keys);
  return keys;
}

std::string ConfigHelp() {
  std::ostringstream out;
  out << "Config file keys (JSON, all optional):\n";
  for (const ConfigKey& key : ConfigSchema()) {
    out << "  " << key.path << " = " << key.default_value;
    if (!key.description.empty()) out << "\n      " << key.description;
    out << '\n';
  }
  return out.str();
}

}  // namespace randcheck::harness
