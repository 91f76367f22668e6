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

#ifndef RANDCHECK_TEXT_H_
#define RANDCHECK_TEXT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace randcheck::text {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";

struct Record {
  std::string text;
  int label = 0;
};

// Records plus the label map: label_names[i] is the string for class i, in
// first-appearance order.
struct Corpus {
  std::vector<Record> records;
  std::vector<std::string> label_names;

  int class_count() const { return static_cast<int>(label_names.size()); }
};

enum class CorpusFormat { kCsv, kTsv };

CorpusFormat ParseCorpusFormat(std::string_view name);
char Delimiter(CorpusFormat format);

// Reads a delimited file with a header naming `text` and `label` columns.
// Throws IngestionError carrying the offending row number.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
void WriteCorpus(const std::filesystem::path& path, const Corpus& corpus,
                 CorpusFormat format);

// Sidecar `label<TAB>index` lines.
void WriteLabelMap(const std::filesystem::path& path,
                   std::span<const std::string> label_names);
std::vector<std::string> ReadLabelMap(const std::filesystem::path& path);

struct SyntheticSpec {
  int n_docs = 2000;
  int classes = 2;
  int vocab_size = 400;
  int min_len = 40;
  int max_len = 80;
  // 0 makes keywords independent of the label; 1 plants only own-class
  // keywords.
  double keyword_strength = 1.0;
  // Planted keywords per document, drawn uniformly; max_keywords = 0 means
  // a third of the document length.
  int min_keywords = 1;
  int max_keywords = 2;
  std::uint64_t seed = 0;
};

inline constexpr int kKeywordsPerClass = 5;

std::string KeywordToken(int label, int index);

// Planted-keyword corpus. Every class owns kKeywordsPerClass tokens; a
// document of class c contains a strict plurality of class-c keywords among
// Zipf-distributed filler, so keyword counting separates the classes.
Corpus generate_synthetic(const SyntheticSpec& spec);

// Lowercases, splits on whitespace and emits each punctuation character as
// its own token.
std::vector<std::string> SplitTokens(std::string_view text);

class Vocab {
 public:
  // tokens[i] is the string for id i; tokens[0..1] must be PAD and UNK.
  Vocab(std::vector<std::string> tokens, int max_seq_len);

  // Tokens with frequency >= min_freq in `texts`, most frequent first (ties
  // lexicographic), capped at max_size entries beyond PAD and UNK.
  static Vocab Build(std::span<const std::string> texts, int max_seq_len,
                     int min_freq = 2, std::size_t max_size = 20000);

  int id(std::string_view token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  int max_seq_len() const { return max_seq_len_; }

  // `token<TAB>id` lines.
  void Save(const std::filesystem::path& path) const;
  static Vocab Load(const std::filesystem::path& path, int max_seq_len);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int max_seq_len_;
};

struct TokenizedDoc {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<int> ids;
  int label = 0;

  std::size_t length() const { return ids.size(); }
};

TokenizedDoc tokenize(std::string_view text, const Vocab& vocab,
                      std::string doc_id = {}, int label = 0);

// Indices into Corpus::records.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Stratified shuffle split. Test size is round(N * test_ratio); validation
// is round(|train| * val_fraction) taken out of train. Per-class counts use
// largest-remainder apportionment.
SplitIndices split_dataset(const Corpus& corpus, double train_ratio,
                           double test_ratio, double val_fraction,
                           std::uint64_t seed);

struct DatasetSplit {
  std::vector<TokenizedDoc> train;
  std::vector<TokenizedDoc> validation;
  std::vector<TokenizedDoc> test;
  std::uint64_t split_seed = 0;
  int class_count = 0;
};

std::string DocId(std::size_t record_index);

DatasetSplit TokenizeSplit(const Corpus& corpus, const SplitIndices& indices,
                           const Vocab& vocab, std::uint64_t split_seed);

std::vector<std::string> Texts(const Corpus& corpus,
                               std::span<const std::size_t> indices);

// Fraction of token positions mapped to UNK.
double OovRate(std::span<const TokenizedDoc> docs);

}  // namespace randcheck::text

#endif  // RANDCHECK_TEXT_H_
