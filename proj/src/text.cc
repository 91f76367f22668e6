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

#include "randcheck/text.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "randcheck/csv.h"
#include "randcheck/errors.h"
#include "randcheck/random.h"

namespace randcheck::text {
namespace {

std::ifstream OpenForRead(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(0, "cannot open " + path.string());
  return in;
}

std::ofstream OpenForWrite(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Splits `total` across buckets proportionally to `weights` (largest
// remainder; ties go to the lower bucket index).
std::vector<std::size_t> Apportion(std::size_t total,
                                   const std::vector<std::size_t>& weights) {
  const std::size_t weight_sum =
      std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  std::vector<std::size_t> out(weights.size(), 0);
  if (weight_sum == 0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = static_cast<double>(total) *
                         static_cast<double>(weights[i]) /
                         static_cast<double>(weight_sum);
    out[i] = static_cast<std::size_t>(std::floor(quota));
    assigned += out[i];
    remainders.emplace_back(quota - std::floor(quota), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k) {
    ++out[remainders[k].second];
    ++assigned;
  }
  return out;
}

}  // namespace

CorpusFormat ParseCorpusFormat(std::string_view name) {
  if (name == "csv") return CorpusFormat::kCsv;
  if (name == "tsv") return CorpusFormat::kTsv;
  throw ContractError("unknown corpus format '" + std::string(name) + "'");
}

char Delimiter(CorpusFormat format) {
  return format == CorpusFormat::kCsv ? ',' : '\t';
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in = OpenForRead(path);
  csv::Reader reader(in, Delimiter(format));
  std::optional<std::vector<std::string>> header;
  try {
    header = reader.Next();
  } catch (const std::runtime_error& e) {
    throw IngestionError(1, e.what());
  }
  if (!header || (header->size() == 1 && header->front().empty())) {
    throw IngestionError(0, "empty file " + path.string());
  }
  auto column = [&](std::string_view name) {
    auto it = std::find(header->begin(), header->end(), name);
    if (it == header->end()) {
      throw IngestionError(1, "missing column '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - header->begin());
  };
  const std::size_t text_col = column("text");
  const std::size_t label_col = column("label");

  Corpus corpus;
  std::map<std::string, int> label_index;
  while (true) {
    std::optional<std::vector<std::string>> row;
    try {
      row = reader.Next();
    } catch (const std::runtime_error& e) {
      throw IngestionError(reader.line(), e.what());
    }
    if (!row) break;
    if (row->size() == 1 && row->front().empty()) continue;  // blank line
    if (row->size() != header->size()) {
      throw IngestionError(reader.line(),
                           "expected " + std::to_string(header->size()) +
                               " fields, found " + std::to_string(row->size()));
    }
    const std::string& label = (*row)[label_col];
    if (label.empty()) throw IngestionError(reader.line(), "empty label");
    if ((*row)[text_col].empty()) {
      throw IngestionError(reader.line(), "empty text");
    }
    auto [it, inserted] =
        label_index.try_emplace(label, static_cast<int>(corpus.label_names.size()));
    if (inserted) corpus.label_names.push_back(label);
    corpus.records.push_back({(*row)[text_col], it->second});
  }
  if (corpus.records.empty()) {
    throw IngestionError(0, "empty file " + path.string() + " (no records)");
  }
  if (corpus.label_names.size() < 2) {
    throw IngestionError(0, "at least 2 classes required");
  }
  return corpus;
}

void WriteCorpus(const std::filesystem::path& path, const Corpus& corpus,
                 CorpusFormat format) {
  const char sep = Delimiter(format);
  std::ofstream out = OpenForWrite(path);
  out << "text" << sep << "label\n";
  for (const Record& r : corpus.records) {
    out << csv::JoinRow({r.text, corpus.label_names.at(r.label)}, sep) << '\n';
  }
}

void WriteLabelMap(const std::filesystem::path& path,
                   std::span<const std::string> label_names) {
  std::ofstream out = OpenForWrite(path);
  for (std::size_t i = 0; i < label_names.size(); ++i) {
    out << label_names[i] << '\t' << i << '\n';
  }
}

std::vector<std::string> ReadLabelMap(const std::filesystem::path& path) {
  std::ifstream in = OpenForRead(path);
  std::vector<std::string> names;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos ||
        line.substr(tab + 1) != std::to_string(names.size())) {
      throw IngestionError(row, "malformed label map line");
    }
    names.push_back(line.substr(0, tab));
  }
  return names;
}

std::string KeywordToken(int label, int index) {
  return "kw" + std::to_string(label) + "n" + std::to_string(index);
}

Corpus generate_synthetic(const SyntheticSpec& spec) {
  const int k = spec.classes;
  if (k < 2) throw ContractError("generate_synthetic: need at least 2 classes");
  if (spec.vocab_size <= 10 * k) {
    throw ContractError("generate_synthetic: vocab_size must exceed 10 * classes");
  }
  if (spec.min_len < 4 || spec.max_len < spec.min_len) {
    throw ContractError("generate_synthetic: document lengths must satisfy 4 <= min <= max");
  }
  if (spec.n_docs < k) {
    throw ContractError("generate_synthetic: need at least one document per class");
  }
  if (spec.min_keywords < 1 || spec.min_keywords > spec.min_len ||
      spec.max_keywords < 0) {
    throw ContractError("generate_synthetic: keyword counts must satisfy 1 <= min_keywords <= min_len");
  }
  if (!(spec.keyword_strength >= 0.0 && spec.keyword_strength <= 1.0)) {
    throw ContractError("generate_synthetic: keyword_strength must lie in [0, 1]");
  }

  const int n_filler = spec.vocab_size - k * kKeywordsPerClass;
  std::vector<double> filler_cdf(static_cast<std::size_t>(n_filler));
  double acc = 0.0;
  for (int r = 0; r < n_filler; ++r) {
    acc += 1.0 / (r + 1.0);
    filler_cdf[static_cast<std::size_t>(r)] = acc;
  }
  for (double& c : filler_cdf) c /= acc;

  const double p_own = 1.0 / k + spec.keyword_strength * (1.0 - 1.0 / k);
  Rng rng(spec.seed);
  Corpus corpus;
  for (int c = 0; c < k; ++c) corpus.label_names.push_back("c" + std::to_string(c));

  for (int d = 0; d < spec.n_docs; ++d) {
    const int label = d % k;
    const int len = spec.min_len + static_cast<int>(rng.Below(
                                       static_cast<std::uint64_t>(spec.max_len - spec.min_len + 1)));
    const int max_kw = std::clamp(spec.max_keywords > 0 ? spec.max_keywords : len / 3,
                                  spec.min_keywords, len);
    const int n_kw = spec.min_keywords + static_cast<int>(rng.Below(
                                             static_cast<std::uint64_t>(max_kw - spec.min_keywords + 1)));

    std::vector<int> kw_class(static_cast<std::size_t>(n_kw));
    for (int attempt = 0;; ++attempt) {
      std::vector<int> counts(static_cast<std::size_t>(k), 0);
      for (int& cls : kw_class) {
        if (spec.keyword_strength == 0.0) {
          cls = static_cast<int>(rng.Below(static_cast<std::uint64_t>(k)));
        } else if (rng.Uniform() < p_own) {
          cls = label;
        } else {
          cls = static_cast<int>(rng.Below(static_cast<std::uint64_t>(k - 1)));
          if (cls >= label) ++cls;
        }
        ++counts[static_cast<std::size_t>(cls)];
      }
      if (spec.keyword_strength == 0.0) break;
      int max_other = 0;
      for (int c = 0; c < k; ++c) {
        if (c != label) max_other = std::max(max_other, counts[static_cast<std::size_t>(c)]);
      }
      if (counts[static_cast<std::size_t>(label)] > max_other) break;
      if (attempt == 1000) {
        std::fill(kw_class.begin(), kw_class.end(), label);
        break;
      }
    }

    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(len));
    for (int cls : kw_class) {
      const int j = static_cast<int>(rng.Below(kKeywordsPerClass));
      tokens.push_back(KeywordToken(cls, j));
    }
    while (static_cast<int>(tokens.size()) < len) {
      const double u = rng.Uniform();
      const auto r = std::upper_bound(filler_cdf.begin(), filler_cdf.end(), u) -
                     filler_cdf.begin();
      tokens.push_back("w" + std::to_string(std::min<long>(r, n_filler - 1)));
    }
    rng.Shuffle(tokens);

    std::string text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) text.push_back(' ');
      text += tokens[i];
    }
    corpus.records.push_back({std::move(text), label});
  }
  return corpus;
}

std::vector<std::string> SplitTokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, raw);
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return tokens;
}

Vocab::Vocab(std::vector<std::string> tokens, int max_seq_len)
    : tokens_(std::move(tokens)), max_seq_len_(max_seq_len) {
  if (max_seq_len_ < 1) throw ContractError("vocab: max_seq_len must be positive");
  if (tokens_.size() < 2 || tokens_[kPadId] != kPadToken ||
      tokens_[kUnkId] != kUnkToken) {
    throw ContractError("vocab: ids 0 and 1 must be <pad> and <unk>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ContractError("vocab: duplicate token '" + tokens_[i] + "'");
    }
  }
}

Vocab Vocab::Build(std::span<const std::string> texts, int max_seq_len,
                   int min_freq, std::size_t max_size) {
  std::unordered_map<std::string, int> freq;
  for (const std::string& t : texts) {
    std::vector<std::string> tokens = SplitTokens(t);
    if (tokens.size() > static_cast<std::size_t>(max_seq_len)) {
      tokens.resize(static_cast<std::size_t>(max_seq_len));
    }
    for (std::string& tok : tokens) ++freq[std::move(tok)];
  }
  std::vector<std::pair<std::string, int>> kept;
  for (auto& [tok, n] : freq) {
    if (n >= min_freq) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (kept.size() > max_size) kept.resize(max_size);
  std::vector<std::string> tokens{std::string(kPadToken), std::string(kUnkToken)};
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocab(std::move(tokens), max_seq_len);
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) {
    throw ContractError("vocab: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocab::Save(const std::filesystem::path& path) const {
  std::ofstream out = OpenForWrite(path);
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\t' << i << '\n';
  }
}

Vocab Vocab::Load(const std::filesystem::path& path, int max_seq_len) {
  std::ifstream in = OpenForRead(path);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos ||
        line.substr(tab + 1) != std::to_string(tokens.size())) {
      throw IngestionError(row, "vocab ids must be contiguous from 0");
    }
    tokens.push_back(line.substr(0, tab));
  }
  return Vocab(std::move(tokens), max_seq_len);
}

TokenizedDoc tokenize(std::string_view text, const Vocab& vocab,
                      std::string doc_id, int label) {
  TokenizedDoc doc;
  doc.doc_id = std::move(doc_id);
  doc.label = label;
  doc.tokens = SplitTokens(text);
  if (doc.tokens.empty()) {
    throw ContractError("tokenize: text '" + std::string(text.substr(0, 40)) +
                        "' yields no tokens");
  }
  if (doc.tokens.size() > static_cast<std::size_t>(vocab.max_seq_len())) {
    doc.tokens.resize(static_cast<std::size_t>(vocab.max_seq_len()));
  }
  doc.ids.reserve(doc.tokens.size());
  for (const std::string& t : doc.tokens) doc.ids.push_back(vocab.id(t));
  return doc;
}

SplitIndices split_dataset(const Corpus& corpus, double train_ratio,
                           double test_ratio, double val_fraction,
                           std::uint64_t seed) {
  if (train_ratio < 0.0 || test_ratio < 0.0 ||
      std::abs(train_ratio + test_ratio - 1.0) > 1e-9) {
    throw ContractError("split_dataset: ratios must be non-negative and sum to 1");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ContractError("split_dataset: val_fraction must lie in (0, 1)");
  }
  const std::size_t n = corpus.records.size();
  const std::size_t k = static_cast<std::size_t>(corpus.class_count());
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < n; ++i) {
    by_class.at(static_cast<std::size_t>(corpus.records[i].label)).push_back(i);
  }
  Rng rng(seed);
  std::vector<std::size_t> class_sizes;
  for (auto& members : by_class) {
    rng.Shuffle(members);
    class_sizes.push_back(members.size());
  }
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_ratio));
  const std::vector<std::size_t> test_per = Apportion(n_test, class_sizes);
  std::vector<std::size_t> train_per(k);
  for (std::size_t c = 0; c < k; ++c) train_per[c] = class_sizes[c] - test_per[c];
  const std::size_t n_train_all = n - n_test;
  const auto n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_train_all) * val_fraction));
  const std::vector<std::size_t> val_per = Apportion(n_val, train_per);

  SplitIndices out;
  for (std::size_t c = 0; c < k; ++c) {
    const auto& members = by_class[c];
    std::size_t pos = 0;
    for (std::size_t i = 0; i < test_per[c]; ++i) out.test.push_back(members[pos++]);
    for (std::size_t i = 0; i < val_per[c]; ++i) out.validation.push_back(members[pos++]);
    while (pos < members.size()) out.train.push_back(members[pos++]);
  }
  if (out.train.empty()) throw ContractError("split_dataset: empty train split");
  if (out.validation.empty()) throw ContractError("split_dataset: empty validation split");
  if (out.test.empty()) throw ContractError("split_dataset: empty test split");
  rng.Shuffle(out.train);
  rng.Shuffle(out.validation);
  rng.Shuffle(out.test);
  return out;
}

std::string DocId(std::size_t record_index) {
  return "doc" + std::to_string(record_index);
}

DatasetSplit TokenizeSplit(const Corpus& corpus, const SplitIndices& indices,
                           const Vocab& vocab, std::uint64_t split_seed) {
  DatasetSplit split;
  split.split_seed = split_seed;
  split.class_count = corpus.class_count();
  auto convert = [&](const std::vector<std::size_t>& idx) {
    std::vector<TokenizedDoc> docs;
    docs.reserve(idx.size());
    for (std::size_t i : idx) {
      const Record& r = corpus.records.at(i);
      docs.push_back(tokenize(r.text, vocab, DocId(i), r.label));
    }
    return docs;
  };
  split.train = convert(indices.train);
  split.validation = convert(indices.validation);
  split.test = convert(indices.test);
  return split;
}

std::vector<std::string> Texts(const Corpus& corpus,
                               std::span<const std::size_t> indices) {
  std::vector<std::string> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(corpus.records.at(i).text);
  return out;
}

double OovRate(std::span<const TokenizedDoc> docs) {
  std::size_t total = 0;
  std::size_t unk = 0;
  for (const TokenizedDoc& d : docs) {
    total += d.ids.size();
    unk += static_cast<std::size_t>(std::count(d.ids.begin(), d.ids.end(), kUnkId));
  }
  return total == 0 ? 0.0 : static_cast<double>(unk) / static_cast<double>(total);
}

}  // namespace randcheck::text
