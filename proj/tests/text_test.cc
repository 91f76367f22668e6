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
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "randcheck/csv.h"
#include "randcheck/errors.h"
#include "randcheck/text.h"

namespace randcheck::text {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("randcheck_text_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void WriteText(const fs::path& path, const std::string& body) {
  std::ofstream(path, std::ios::binary) << body;
}

Corpus SmallCorpus(std::size_t n, int classes) {
  Corpus c;
  for (int k = 0; k < classes; ++k) c.label_names.push_back("l" + std::to_string(k));
  for (std::size_t i = 0; i < n; ++i) {
    c.records.push_back({"doc number " + std::to_string(i), static_cast<int>(i % classes)});
  }
  return c;
}

TEST(SplitTokensTest, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(SplitTokens("Hello, World!  it's"),
            (std::vector<std::string>{"hello", ",", "world", "!", "it", "'", "s"}));
  EXPECT_TRUE(SplitTokens("   \t\n").empty());
}

TEST(VocabTest, ReservesPadAndUnk) {
  std::vector<std::string> texts{"a b b c", "b c d"};
  Vocab v = Vocab::Build(texts, 16, 2);
  EXPECT_EQ(v.token(kPadId), kPadToken);
  EXPECT_EQ(v.token(kUnkId), kUnkToken);
  EXPECT_NE(v.id("b"), kUnkId);
  EXPECT_NE(v.id("c"), kUnkId);
  // Seen only once: below min_freq.
  EXPECT_EQ(v.id("a"), kUnkId);
  EXPECT_EQ(v.id("never"), kUnkId);
}

TEST(VocabTest, MaxSizeCapsTokenCount) {
  std::vector<std::string> texts{"a a a b b c c d d e e"};
  Vocab v = Vocab::Build(texts, 16, 1, 4);
  // Cap excludes <pad> and <unk>; frequency ties break lexicographically.
  EXPECT_EQ(v.size(), 6);
  EXPECT_NE(v.id("a"), kUnkId);
  EXPECT_NE(v.id("d"), kUnkId);
  EXPECT_EQ(v.id("e"), kUnkId);
}

TEST(VocabTest, SaveLoadRoundTrip) {
  TempDir dir;
  std::vector<std::string> texts{"x y z x y z", "q r q r"};
  Vocab v = Vocab::Build(texts, 8, 1);
  v.Save(dir / "vocab.tsv");
  Vocab back = Vocab::Load(dir / "vocab.tsv", 8);
  ASSERT_EQ(back.size(), v.size());
  for (int i = 0; i < v.size(); ++i) EXPECT_EQ(back.token(i), v.token(i));
}

TEST(VocabTest, RejectsDuplicatesAndMissingSpecials) {
  EXPECT_THROW(Vocab({"<pad>", "<unk>", "a", "a"}, 4), ContractError);
  EXPECT_THROW(Vocab({"a", "<unk>"}, 4), ContractError);
  EXPECT_THROW(Vocab({"<pad>", "<unk>"}, 0), ContractError);
}

TEST(TokenizeTest, TruncatesAndMapsUnknowns) {
  Vocab v({"<pad>", "<unk>", "the", "cat"}, 3);
  TokenizedDoc doc = tokenize("The cat sat down", v, "d0", 1);
  EXPECT_EQ(doc.tokens, (std::vector<std::string>{"the", "cat", "sat"}));
  EXPECT_EQ(doc.ids, (std::vector<int>{2, 3, kUnkId}));
  EXPECT_EQ(doc.label, 1);
  EXPECT_EQ(doc.doc_id, "d0");
}

TEST(TokenizeTest, EmptyTextIsAnError) {
  Vocab v({"<pad>", "<unk>"}, 3);
  EXPECT_THROW(tokenize("   ", v), ContractError);
}

TEST(SplitTest, ProportionsAndDisjointness) {
  Corpus c = SmallCorpus(1000, 2);
  SplitIndices s = split_dataset(c, 0.8, 0.2, 0.1, 42);
  EXPECT_EQ(s.test.size(), 200u);
  EXPECT_EQ(s.validation.size(), 80u);
  EXPECT_EQ(s.train.size(), 720u);
  std::set<std::size_t> all;
  for (const auto* part : {&s.train, &s.validation, &s.test}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), 1000u);
}

TEST(SplitTest, StratifiedWithinOneDocumentPerClass) {
  // Unbalanced 3-class corpus.
  Corpus c;
  c.label_names = {"a", "b", "c"};
  for (int i = 0; i < 600; ++i) c.records.push_back({"t", 0});
  for (int i = 0; i < 300; ++i) c.records.push_back({"t", 1});
  for (int i = 0; i < 100; ++i) c.records.push_back({"t", 2});
  SplitIndices s = split_dataset(c, 0.8, 0.2, 0.1, 7);
  auto counts = [&](const std::vector<std::size_t>& idx) {
    std::vector<double> n(3, 0.0);
    for (std::size_t i : idx) n[static_cast<std::size_t>(c.records[i].label)] += 1.0;
    return n;
  };
  const std::vector<double> share{0.6, 0.3, 0.1};
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    std::vector<double> n = counts(*part);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_NEAR(n[k], share[k] * static_cast<double>(part->size()), 1.0);
    }
  }
}

TEST(SplitTest, DeterministicPerSeed) {
  Corpus c = SmallCorpus(300, 3);
  SplitIndices a = split_dataset(c, 0.8, 0.2, 0.1, 9);
  SplitIndices b = split_dataset(c, 0.8, 0.2, 0.1, 9);
  SplitIndices other = split_dataset(c, 0.8, 0.2, 0.1, 10);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(a.train, other.train);
}

TEST(SplitTest, RejectsBadRatios) {
  Corpus c = SmallCorpus(100, 2);
  EXPECT_THROW(split_dataset(c, 0.7, 0.2, 0.1, 0), ContractError);
  EXPECT_THROW(split_dataset(c, 0.8, 0.2, 0.0, 0), ContractError);
}

TEST(CsvTest, QuotedFieldsRoundTrip) {
  std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", "multi\nline"};
  std::istringstream in(csv::JoinRow(fields, ',') + "\n");
  csv::Reader r(in, ',');
  auto row = r.Next();
  ASSERT_TRUE(row.has_value());
  EXPECT_EQ(*row, fields);
  EXPECT_FALSE(r.Next().has_value());
}

TEST(CsvTest, UnterminatedQuoteThrows) {
  std::istringstream in("a,\"b\n");
  csv::Reader r(in, ',');
  EXPECT_THROW(r.Next(), std::runtime_error);
}

TEST(CorpusTest, WriteLoadRoundTrip) {
  TempDir dir;
  for (CorpusFormat format : {CorpusFormat::kCsv, CorpusFormat::kTsv}) {
    Corpus c;
    c.label_names = {"neg", "pos"};
    c.records = {{"good, \"fine\" film", 1}, {"bad\tawful", 0}, {"ok", 1}};
    const fs::path p = dir / (format == CorpusFormat::kCsv ? "c.csv" : "c.tsv");
    WriteCorpus(p, c, format);
    Corpus back = load_corpus(p, format);
    ASSERT_EQ(back.records.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(back.records[i].text, c.records[i].text);
      EXPECT_EQ(back.label_names[static_cast<std::size_t>(back.records[i].label)],
                c.label_names[static_cast<std::size_t>(c.records[i].label)]);
    }
  }
}

TEST(CorpusTest, LabelMapRoundTrip) {
  TempDir dir;
  std::vector<std::string> names{"alpha", "beta", "gamma"};
  WriteLabelMap(dir / "labels.tsv", names);
  EXPECT_EQ(ReadLabelMap(dir / "labels.tsv"), names);
}

struct BadFile {
  const char* name;
  const char* body;
  std::size_t row;
};

class IngestionTest : public ::testing::TestWithParam<BadFile> {};

TEST_P(IngestionTest, ReportsRow) {
  TempDir dir;
  const BadFile& bad = GetParam();
  WriteText(dir / "c.csv", bad.body);
  try {
    load_corpus(dir / "c.csv", CorpusFormat::kCsv);
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.row(), bad.row) << e.what();
  }
}

INSTANTIATE_TEST_SUITE_P(
    BadFiles, IngestionTest,
    ::testing::Values(BadFile{"empty", "", 0}, BadFile{"header_only", "text,label\n", 0},
                      BadFile{"missing_label_column", "text,kind\na,b\n", 1},
                      BadFile{"wrong_field_count", "text,label\na,x\nb\n", 3},
                      BadFile{"empty_label", "text,label\na,x\nb,\n", 3},
                      BadFile{"empty_text", "text,label\na,x\n,y\n", 3},
                      BadFile{"single_class", "text,label\na,x\nb,x\n", 0},
                      BadFile{"unterminated_quote", "text,label\na,x\n\"b,y\n", 3}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(IngestionTest, MissingFile) {
  EXPECT_THROW(load_corpus("/nonexistent/corpus.csv", CorpusFormat::kCsv), IngestionError);
}

TEST(SyntheticTest, DeterministicPerSeed) {
  SyntheticSpec spec;
  spec.n_docs = 50;
  spec.seed = 3;
  Corpus a = generate_synthetic(spec);
  Corpus b = generate_synthetic(spec);
  spec.seed = 4;
  Corpus c = generate_synthetic(spec);
  ASSERT_EQ(a.records.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(a.records[i].text, b.records[i].text);
    EXPECT_EQ(a.records[i].label, b.records[i].label);
  }
  EXPECT_NE(a.records[0].text, c.records[0].text);
}

// Keyword tokens "kw<c>n<j>" belong to class c only; the own class holds the
// strict majority of keywords in every document when strength > 0.
TEST(SyntheticTest, KeywordsAreClassDisjointAndDecisive) {
  SyntheticSpec spec;
  spec.n_docs = 300;
  spec.classes = 3;
  spec.min_len = 10;
  spec.max_len = 20;
  spec.min_keywords = 2;
  spec.max_keywords = 5;
  spec.keyword_strength = 0.6;
  spec.seed = 17;
  Corpus c = generate_synthetic(spec);
  ASSERT_EQ(c.class_count(), 3);
  std::vector<int> per_class(3, 0);
  for (const Record& r : c.records) {
    ++per_class[static_cast<std::size_t>(r.label)];
    std::vector<int> counts(3, 0);
    const std::vector<std::string> tokens = SplitTokens(r.text);
    EXPECT_GE(tokens.size(), 10u);
    EXPECT_LE(tokens.size(), 20u);
    int total = 0;
    for (const std::string& t : tokens) {
      if (t.rfind("kw", 0) != 0) continue;
      const int cls = std::stoi(t.substr(2, t.find('n') - 2));
      ASSERT_GE(cls, 0);
      ASSERT_LT(cls, 3);
      ++counts[static_cast<std::size_t>(cls)];
      ++total;
    }
    EXPECT_GE(total, 2);
    EXPECT_LE(total, 5);
    for (int k = 0; k < 3; ++k) {
      if (k != r.label) EXPECT_GT(counts[static_cast<std::size_t>(r.label)], counts[static_cast<std::size_t>(k)]);
    }
  }
  EXPECT_EQ(per_class, (std::vector<int>{100, 100, 100}));
}

TEST(SyntheticTest, ZeroStrengthKeywordsAreUninformative) {
  SyntheticSpec spec;
  spec.n_docs = 4000;
  spec.keyword_strength = 0.0;
  spec.min_keywords = 1;
  spec.max_keywords = 1;
  spec.seed = 5;
  Corpus c = generate_synthetic(spec);
  int own = 0;
  for (const Record& r : c.records) {
    for (const std::string& t : SplitTokens(r.text)) {
      if (t.rfind("kw", 0) == 0 && std::stoi(t.substr(2)) == r.label) ++own;
    }
  }
  // Binomial(4000, 0.5): five standard deviations is about 160.
  EXPECT_NEAR(own, 2000, 160);
}

TEST(SyntheticTest, RejectsInvalidSpecs) {
  SyntheticSpec spec;
  spec.classes = 1;
  EXPECT_THROW(generate_synthetic(spec), ContractError);
  spec = {};
  spec.keyword_strength = 1.5;
  EXPECT_THROW(generate_synthetic(spec), ContractError);
  spec = {};
  spec.min_keywords = 0;
  EXPECT_THROW(generate_synthetic(spec), ContractError);
  spec = {};
  spec.min_len = 10;
  spec.max_len = 5;
  EXPECT_THROW(generate_synthetic(spec), ContractError);
}

TEST(TokenizeSplitTest, DocIdsFollowRecordIndex) {
  Corpus c = SmallCorpus(100, 2);
  SplitIndices idx = split_dataset(c, 0.8, 0.2, 0.1, 1);
  std::vector<std::string> texts = Texts(c, idx.train);
  Vocab v = Vocab::Build(texts, 8, 1);
  DatasetSplit s = TokenizeSplit(c, idx, v, 1);
  ASSERT_EQ(s.test.size(), idx.test.size());
  for (std::size_t i = 0; i < s.test.size(); ++i) {
    EXPECT_EQ(s.test[i].doc_id, DocId(idx.test[i]));
    EXPECT_EQ(s.test[i].label, c.records[idx.test[i]].label);
  }
  EXPECT_EQ(s.class_count, 2);
}

}  // namespace
}  // namespace randcheck::text
