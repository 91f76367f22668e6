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

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include "json.hpp"

#include "randcheck/config.h"
#include "randcheck/csv.h"
#include "randcheck/errors.h"
#include "randcheck/harness.h"
#include "randcheck/random.h"
#include "test_util.h"

namespace randcheck::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using randcheck::testing::ScratchDir;
using randcheck::testing::TinyConfigJson;

std::string ConfigErrorField(const json& j) {
  try {
    ParseConfig(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

TEST(ConfigTest, DefaultsRoundTrip) {
  const json canonical = ToJson(DefaultConfig());
  EXPECT_EQ(ToJson(ParseConfig(canonical)), canonical);
  EXPECT_EQ(ToJson(ParseConfig(json::object())), canonical);
}

TEST(ConfigTest, ErrorsNameTheField) {
  EXPECT_EQ(ConfigErrorField(json::parse(R"({"train": {"patience": 50}})")), "train.patience");
  EXPECT_EQ(ConfigErrorField(json::parse(R"({"train": {"learning_rates": [0.1, "x"]}})")),
            "train.learning_rates[1]");
  EXPECT_EQ(ConfigErrorField(json::parse(R"({"model": {"colour": 1}})")), "model.colour");
  EXPECT_EQ(ConfigErrorField(json::parse(R"({"bogus": {}})")), "bogus");
  EXPECT_EQ(ConfigErrorField(json::parse(R"({"split": {"train_ratio": 0.7}})")),
            "split.train_ratio");
  EXPECT_EQ(ConfigErrorField(json::parse(R"({"eval": {"methods": ["VN", "LIME"]}})")),
            "eval.methods[1]");
  EXPECT_EQ(ConfigErrorField(json::parse(R"({"seeds": {"first_head": 4, "second_head": 4}})")),
            "seeds.second_head");
  EXPECT_EQ(ConfigErrorField(json::parse(
                R"({"seeds": {"first_head": 4, "second_head": 4, "allow_identical_heads": true}})")),
            "<no error>");
  EXPECT_EQ(ConfigErrorField(json::parse(R"({"model": {"embed_dim": 0}})")), "model.embed_dim");
}

TEST(ConfigTest, LoadConfigReportsMissingAndMalformedFiles) {
  ScratchDir dir;
  EXPECT_THROW(LoadConfig(dir / "absent.json"), ConfigError);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(LoadConfig(dir / "bad.json"), ConfigError);
  std::ofstream(dir / "good.json") << R"({"seeds": {"global": 9}})";
  EXPECT_EQ(LoadConfig(dir / "good.json").seeds.global, 9u);
}

TEST(ConfigTest, ShippedDefaultConfigMatchesBuiltInDefaults) {
  const std::filesystem::path path = std::filesystem::path(RANDCHECK_CONFIGS) / "default.json";
  EXPECT_EQ(ToJson(LoadConfig(path)), ToJson(DefaultConfig()));
}

TEST(ConfigTest, SchemaCoversEveryKey) {
  std::vector<std::string> schema_paths;
  for (const ConfigKey& k : ConfigSchema()) {
    schema_paths.push_back(k.path);
    EXPECT_FALSE(k.description.empty()) << k.path;
  }
  const json flat = ToJson(DefaultConfig()).flatten();
  for (const auto& [pointer, value] : flat.items()) {
    std::string dotted = pointer.substr(1);
    std::replace(dotted.begin(), dotted.end(), '/', '.');
    // Array elements flatten to ".0", ".1"; the schema lists the array itself.
    const auto cut = dotted.find_first_of("0123456789", dotted.rfind('.') + 1);
    if (cut == dotted.rfind('.') + 1) dotted = dotted.substr(0, dotted.rfind('.'));
    EXPECT_NE(std::find(schema_paths.begin(), schema_paths.end(), dotted), schema_paths.end())
        << dotted;
  }
}

TEST(SeedsTest, DerivedPerStageWithOverrides) {
  SeedOptions opts;
  opts.global = 77;
  const ResolvedSeeds a = ResolveSeeds(opts);
  EXPECT_EQ(a.data, DeriveSeed(77, "data"));
  EXPECT_EQ(a.first_head, DeriveSeed(77, "first_head"));
  EXPECT_NE(a.first_head, a.second_head);
  EXPECT_NE(a.encoder, a.rand_head);
  opts.second_head = 5;
  const ResolvedSeeds b = ResolveSeeds(opts);
  EXPECT_EQ(b.second_head, 5u);
  EXPECT_EQ(b.first_head, a.first_head);
}

TEST(ParallelForTest, ResultsIndependentOfJobs) {
  for (int jobs : {1, 2, 4}) {
    std::vector<std::uint64_t> out(257);
    ParallelFor(out.size(), jobs, [&](std::size_t i) { out[i] = DeriveSeed(i, "x"); });
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out[i], DeriveSeed(i, "x"));
  }
}

TEST(ParallelForTest, RethrowsWorkerFailure) {
  std::atomic<int> ran{0};
  EXPECT_THROW(ParallelFor(50, 3,
                           [&](std::size_t i) {
                             ++ran;
                             if (i == 17) throw std::runtime_error("boom");
                           }),
               std::runtime_error);
  EXPECT_GE(ran.load(), 1);
}

TEST(FilesTest, AtomicWriteReplacesContents) {
  ScratchDir dir;
  WriteFileAtomic(dir / "f.txt", "one");
  WriteFileAtomic(dir / "f.txt", "two");
  EXPECT_EQ(ReadFile(dir / "f.txt"), "two");
  EXPECT_FALSE(fs::exists(dir / "f.txt.tmp"));
}

CellTable Fixture(const std::string& name) {
  return ReadCellTable(fs::path(RANDCHECK_FIXTURES) / name);
}

std::map<std::string, std::size_t> Counts(const std::vector<UnitsCount>& counts) {
  std::map<std::string, std::size_t> out;
  for (const UnitsCount& c : counts) out[c.method] = c.count;
  return out;
}

TEST(WithinUnitsTest, BoundaryIsInclusive) {
  CellTable a{{"M", {{"x", 50.0}, {"y", 50.0}, {"z", 50.0}}}};
  CellTable b{{"M", {{"x", 60.0}, {"y", 40.0}, {"z", 60.5}}}};
  const auto counts = within_units_count(a, b, 10.0);
  ASSERT_EQ(counts.size(), 1u);
  EXPECT_EQ(counts[0].count, 2u);
  EXPECT_EQ(counts[0].total, 3u);
}

TEST(WithinUnitsTest, IdentityCountsEveryCell) {
  const CellTable t4 = Fixture("jaccard25_firstinit_secondinit.csv");
  for (const UnitsCount& c : within_units_count(t4, t4, 0.0)) {
    EXPECT_EQ(c.count, 16u) << c.method;
    EXPECT_EQ(c.total, 16u);
  }
}

TEST(WithinUnitsTest, MismatchedTablesAreRejected) {
  CellTable a{{"M", {{"x", 1.0}}}};
  CellTable b{{"M", {{"y", 1.0}}}};
  CellTable c{{"N", {{"x", 1.0}}}};
  EXPECT_THROW(within_units_count(a, b), ContractError);
  EXPECT_THROW(within_units_count(a, c), ContractError);
}

// Counts on the recorded K=25 tables. The printed cells are rounded to whole
// percent, and one IG cell (Bios/RoBERTa, 51 vs 41) sits exactly on
// the 10-unit boundary, so the inclusive rule counts 8 IG cells.
TEST(WithinUnitsTest, RecordedTablesUnderInclusiveRule) {
  const auto counts = Counts(within_units_count(Fixture("jaccard25_firstinit_secondinit.csv"),
                                                Fixture("jaccard25_firstinit_randinit.csv"), 10.0));
  EXPECT_EQ(counts.at("VN"), 14u);
  EXPECT_EQ(counts.at("SG"), 12u);
  EXPECT_EQ(counts.at("IG"), 8u);
  EXPECT_EQ(counts.at("SHP"), 0u);
}

TEST(CellTableTest, RejectsMalformedFiles) {
  ScratchDir dir;
  std::ofstream(dir / "bad_header.csv") << "a,b,c\nVN,x,1\n";
  EXPECT_THROW(ReadCellTable(dir / "bad_header.csv"), IngestionError);
  std::ofstream(dir / "bad_value.csv") << "method,cell,value\nVN,x,abc\n";
  EXPECT_THROW(ReadCellTable(dir / "bad_value.csv"), IngestionError);
  std::ofstream(dir / "dup.csv") << "method,cell,value\nVN,x,1\nVN,x,2\n";
  EXPECT_THROW(ReadCellTable(dir / "dup.csv"), IngestionError);
}

TEST(MethodSpecTest, LabelsPerReduction) {
  EvalOptions eval;
  eval.reductions = {Reduction::kL2, Reduction::kInputDotGrad};
  std::vector<std::string> labels;
  for (const MethodSpec& s : MethodSpecs(eval)) labels.push_back(s.Label());
  EXPECT_EQ(labels, (std::vector<std::string>{"VN", "VN-IxG", "SG", "SG-IxG", "IG", "IG-IxG",
                                              "SHP", "RND"}));
}

std::vector<std::vector<std::string>> ReadCsv(const fs::path& path) {
  std::ifstream in(path);
  csv::Reader reader(in, ',');
  std::vector<std::vector<std::string>> rows;
  while (auto row = reader.Next()) rows.push_back(*row);
  return rows;
}

// Shared tiny experiment; trained once per test binary.
class TinyExperimentTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new ScratchDir();
    experiment_ = new Experiment(ParseConfig(TinyConfigJson()), dir_->path() / "run");
    report_ = new Report{run_test_diffinit(*experiment_), run_test_untrained(*experiment_)};
    assemble_report(*experiment_, *report_);
  }
  static void TearDownTestSuite() {
    delete report_;
    delete experiment_;
    delete dir_;
  }
  static ScratchDir* dir_;
  static Experiment* experiment_;
  static Report* report_;
};
ScratchDir* TinyExperimentTest::dir_ = nullptr;
Experiment* TinyExperimentTest::experiment_ = nullptr;
Report* TinyExperimentTest::report_ = nullptr;

TEST_F(TinyExperimentTest, WritesEveryArtifact) {
  const fs::path out = experiment_->out_dir();
  for (const char* f : {"report.json", "provenance.json", "per_doc_metrics.csv",
                        "tables/accuracy.csv", "tables/prediction_overlap.csv",
                        "tables/infidelity_firstinit.csv", "tables/infidelity_secondinit.csv",
                        "tables/infidelity_randinit.csv", "tables/sg_sigma.csv",
                        "tables/jaccard_firstinit_secondinit.csv",
                        "tables/jaccard_firstinit_randinit.csv", "tables/within_units.csv",
                        "figures/infidelity.svg", "figures/jaccard_at_25.svg",
                        "checkpoints/FirstInit.json", "checkpoints/manifest.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const json prov = json::parse(ReadFile(out / "provenance.json"));
  EXPECT_TRUE(prov.contains("config"));
  EXPECT_TRUE(prov.contains("seeds"));
}

TEST_F(TinyExperimentTest, EvalSubsampleIsSortedAndSized) {
  const auto& idx = experiment_->eval_indices();
  ASSERT_EQ(idx.size(), 20u);
  EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
}

// Mean infidelity and Jaccard tables can be rebuilt from per_doc_metrics.csv.
TEST_F(TinyExperimentTest, TablesReaggregateFromPerDocRows) {
  const fs::path out = experiment_->out_dir();
  std::map<std::string, std::pair<double, int>> sums;
  const auto rows = ReadCsv(out / "per_doc_metrics.csv");
  ASSERT_EQ(rows.front(), (std::vector<std::string>{"doc_id", "model", "method", "metric", "value"}));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    auto& s = sums[rows[r][1] + "," + rows[r][2] + "," + rows[r][3]];
    s.first += std::stod(rows[r][4]);
    ++s.second;
  }
  for (const char* table : {"tables/infidelity_firstinit.csv", "tables/infidelity_secondinit.csv",
                            "tables/infidelity_randinit.csv"}) {
    const auto t = ReadCsv(out / table);
    for (std::size_t r = 1; r < t.size(); ++r) {
      const auto& s = sums.at(t[r][0] + "," + t[r][1] + ",infidelity");
      EXPECT_NEAR(s.first / s.second, std::stod(t[r][2]), 1e-9) << table << " " << t[r][1];
      EXPECT_EQ(s.second, std::stoi(t[r][5]));
    }
  }
  const auto j = ReadCsv(out / "tables/jaccard_firstinit_secondinit.csv");
  for (std::size_t r = 1; r < j.size(); ++r) {
    const auto& s = sums.at("FirstInit|SecondInit," + j[r][0] + ",jaccard@25");
    EXPECT_NEAR(100.0 * s.first / s.second, std::stod(j[r][1]), 1e-9) << j[r][0];
  }
}

TEST_F(TinyExperimentTest, CachedStagesReload) {
  Experiment again(ParseConfig(TinyConfigJson()), experiment_->out_dir());
  EXPECT_EQ(again.checkpoint(Variant::kFirstInit).ContentHash(),
            experiment_->checkpoint(Variant::kFirstInit).ContentHash());
  const MethodSpec ig{Method::kIntegratedGradients, Reduction::kL2};
  const auto& a = again.attributions(Variant::kSecondInit, ig);
  const auto& b = experiment_->attributions(Variant::kSecondInit, ig);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i].scalar_scores == b[i].scalar_scores);
}

TEST_F(TinyExperimentTest, RerunWithMoreJobsIsByteIdentical) {
  ScratchDir other;
  Experiment e(ParseConfig(TinyConfigJson()), other / "run", 2);
  Report r{run_test_diffinit(e), run_test_untrained(e)};
  assemble_report(e, r);
  for (const auto& entry : fs::directory_iterator(experiment_->out_dir() / "tables")) {
    EXPECT_EQ(ReadFile(entry.path()), ReadFile(other / "run" / "tables" / entry.path().filename()))
        << entry.path().filename();
  }
  EXPECT_EQ(ReadFile(experiment_->out_dir() / "per_doc_metrics.csv"),
            ReadFile(other / "run" / "per_doc_metrics.csv"));
  EXPECT_EQ(ReadFile(experiment_->out_dir() / "report.json"), ReadFile(other / "run" / "report.json"));
}

TEST(IdentityControlTest, IdenticalHeadsGiveIdenticalAttributions) {
  ScratchDir dir;
  json cfg = TinyConfigJson();
  cfg["seeds"]["first_head"] = 3;
  cfg["seeds"]["second_head"] = 3;
  cfg["seeds"]["allow_identical_heads"] = true;
  Experiment e(ParseConfig(cfg), dir / "run");
  const DiffInitSection s = run_test_diffinit(e);
  for (const auto& row : s.jaccard.cells) {
    for (double v : row) EXPECT_EQ(v, 1.0);
  }
  EXPECT_EQ(InfidelityCsv({&s.infidelity_first}).substr(InfidelityCsv({&s.infidelity_first}).find('\n')),
            [&] {
              InfidelityTable t = s.infidelity_second;
              t.variant = s.infidelity_first.variant;
              const std::string text = InfidelityCsv({&t});
              return text.substr(text.find('\n'));
            }());
}

TEST(ExperimentErrorTest, OversizedSubsampleNamesField) {
  ScratchDir dir;
  json cfg = TinyConfigJson();
  cfg["eval"]["eval_subsample_size"] = 1000;
  Experiment e(ParseConfig(cfg), dir / "run");
  try {
    e.eval_docs();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& err) {
    EXPECT_EQ(err.field(), "eval.eval_subsample_size");
  }
}

int RunCli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(RANDCHECK_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, ExitCodes) {
  ScratchDir dir;
  EXPECT_EQ(RunCli("--help", dir / "log"), 0);
  EXPECT_EQ(RunCli("report --config " + (dir / "missing.json").string() + " --out " +
                       (dir / "a").string(),
                   dir / "log"),
            2);
  EXPECT_NE(ReadFile(dir / "log").find("\"error\""), std::string::npos);
  std::ofstream(dir / "unknown.json") << R"({"train": {"epochs": 3}})";
  // error.json lands in an output directory that already exists.
  fs::create_directories(dir / "b");
  EXPECT_EQ(RunCli("train --config " + (dir / "unknown.json").string() + " --out " +
                       (dir / "b").string(),
                   dir / "log"),
            2);
  EXPECT_NE(ReadFile(dir / "log").find("train.epochs"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "b" / "error.json"));
  EXPECT_EQ(RunCli("report", dir / "log"), 2);
  std::ofstream(dir / "corpus.json")
      << R"({"corpus": {"path": ")" + (dir / "nope.csv").string() + R"("}})";
  EXPECT_EQ(RunCli("gen-data --config " + (dir / "corpus.json").string() + " --out " +
                       (dir / "c").string(),
                   dir / "log"),
            1);
}

TEST(CliTest, GenDataThenReportRefusesOverwrite) {
  ScratchDir dir;
  std::ofstream(dir / "tiny.json") << TinyConfigJson().dump();
  const std::string common =
      " --config " + (dir / "tiny.json").string() + " --out " + (dir / "run").string();
  ASSERT_EQ(RunCli("gen-data" + common, dir / "log"), 0) << ReadFile(dir / "log");
  EXPECT_TRUE(fs::exists(dir / "run" / "data" / "corpus.csv"));
  EXPECT_TRUE(fs::exists(dir / "run" / "data" / "vocab.tsv"));
  ASSERT_EQ(RunCli("test-diffinit" + common, dir / "log"), 0) << ReadFile(dir / "log");
  EXPECT_TRUE(fs::exists(dir / "run" / "report.json"));
  EXPECT_EQ(RunCli("test-diffinit" + common, dir / "log"), 1);
  EXPECT_NE(ReadFile(dir / "log").find("--force"), std::string::npos);
  EXPECT_EQ(RunCli("test-diffinit --force" + common, dir / "log"), 0) << ReadFile(dir / "log");
}

}  // namespace
}  // namespace randcheck::harness
