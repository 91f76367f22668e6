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

// randcheck command-line entry point.
//
//   randcheck <subcommand> [--config PATH] --out DIR [--seed N] [--jobs N] [--force]
//
// Exit status: 0 on success, 2 for invalid invocations or configs, 1 for any
// other failure. Failures print one JSON error record to stderr and, when the
// output directory exists, to DIR/error.json.

#include <unistd.h>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "randcheck/config.h"
#include "randcheck/errors.h"
#include "randcheck/format.h"
#include "randcheck/harness.h"
#include "randcheck/metrics.h"
#include "randcheck/text.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using randcheck::harness::Experiment;
using randcheck::harness::ExperimentConfig;
using randcheck::model::Variant;

struct Options {
  std::string command;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool force = false;
};

class Failure : public std::runtime_error {
 public:
  Failure(int code, std::string kind, const std::string& what)
      : std::runtime_error(what), code_(code), kind_(std::move(kind)) {}
  int code() const { return code_; }
  const std::string& kind() const { return kind_; }

 private:
  int code_;
  std::string kind_;
};

// The directory appears under its final name only once it exists in full.
void CreateOutputDir(const fs::path& out) {
  if (fs::exists(out)) {
    if (!fs::is_directory(out)) throw Failure(2, "usage", out.string() + " is not a directory");
    return;
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  fs::path staging = out;
  staging += ".partial-" + std::to_string(::getpid());
  fs::create_directories(staging);
  std::error_code ec;
  fs::rename(staging, out, ec);
  if (ec) {
    fs::remove_all(staging);
    if (!fs::is_directory(out)) {
      throw Failure(1, "runtime", "cannot create " + out.string() + ": " + ec.message());
    }
  }
}

void RefuseCompletedReport(const Options& opt) {
  if (!opt.force && fs::exists(fs::path(opt.out_dir) / "report.json")) {
    throw Failure(1, "refused",
                  opt.out_dir + " already holds a completed report; pass --force to overwrite");
  }
}

void WriteProvenance(Experiment& e, const std::string& config_text, const std::string& command) {
  randcheck::harness::WriteFileAtomic(
      e.out_dir() / "provenance.json",
      randcheck::harness::Provenance(e, config_text, command).dump(2) + "\n");
}

std::vector<Variant> EvaluatedVariants() {
  return {Variant::kFirstInit, Variant::kSecondInit, Variant::kRandInit};
}

void GenData(Experiment& e) {
  const fs::path dir = e.out_dir() / "data";
  fs::create_directories(dir);
  const randcheck::text::Corpus& corpus = e.corpus();
  randcheck::text::WriteCorpus(dir / "corpus.csv", corpus, randcheck::text::CorpusFormat::kCsv);
  randcheck::text::WriteLabelMap(dir / "label_map.tsv", corpus.label_names);
  e.vocab().Save(dir / "vocab.tsv");
  const randcheck::text::DatasetSplit& split = e.data();
  auto ids = [](const std::vector<randcheck::text::TokenizedDoc>& docs) {
    json out = json::array();
    for (const auto& d : docs) out.push_back(d.doc_id);
    return out;
  };
  json j = {{"split_seed", split.split_seed},
            {"train", ids(split.train)},
            {"validation", ids(split.validation)},
            {"test", ids(split.test)},
            {"test_oov_rate", randcheck::text::OovRate(split.test)}};
  randcheck::harness::WriteFileAtomic(dir / "split.json", j.dump(2) + "\n");
  std::cout << "wrote " << corpus.records.size() << " documents, vocabulary of "
            << e.vocab().size() << " to " << dir.string() << "\n";
}

void Train(Experiment& e) {
  const randcheck::model::Variants& v = e.variants();
  const auto& test = e.data().test;
  std::string acc = "variant,accuracy\n";
  for (const auto* c : {&v.pretrain, &v.first, &v.second, &v.rand}) {
    acc += std::string(randcheck::model::Name(c->variant)) + "," +
           randcheck::FormatDouble(randcheck::metrics::accuracy(*c, test)) + "\n";
  }
  randcheck::harness::WriteFileAtomic(e.out_dir() / "tables" / "accuracy.csv", acc);
  std::cout << acc;
}

void Attribute(Experiment& e) {
  for (Variant v : EvaluatedVariants()) {
    for (const auto& spec : randcheck::harness::MethodSpecs(e.config().eval)) {
      e.attributions(v, spec);
      std::cout << randcheck::model::Name(v) << " " << spec.Label() << ": "
                << e.eval_docs().size() << " documents\n";
    }
  }
}

void Infidelity(Experiment& e) {
  for (Variant v : EvaluatedVariants()) {
    randcheck::harness::InfidelityTable table;
    table.variant = std::string(randcheck::model::Name(v));
    for (const auto& spec : randcheck::harness::MethodSpecs(e.config().eval)) {
      table.methods.push_back(spec.Label());
      table.summaries.push_back(randcheck::metrics::Summarize(e.infidelities(v, spec)));
    }
    std::string name = table.variant;
    for (char& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const std::string csv = randcheck::harness::InfidelityCsv({&table});
    randcheck::harness::WriteFileAtomic(e.out_dir() / "tables" / ("infidelity_" + name + ".csv"),
                                        csv);
    std::cout << csv;
  }
}

void Jaccard(Experiment& e) {
  const auto diff = randcheck::harness::run_test_diffinit(e);
  const auto untrained = randcheck::harness::run_test_untrained(e);
  const fs::path tables = e.out_dir() / "tables";
  randcheck::harness::WriteFileAtomic(tables / "jaccard_firstinit_secondinit.csv",
                                      randcheck::harness::JaccardCsv(diff.jaccard));
  randcheck::harness::WriteFileAtomic(tables / "jaccard_firstinit_randinit.csv",
                                      randcheck::harness::JaccardCsv(untrained.jaccard));
  std::cout << randcheck::harness::JaccardCsv(diff.jaccard)
            << randcheck::harness::JaccardCsv(untrained.jaccard);
}

int Run(const Options& opt) {
  ExperimentConfig config = randcheck::harness::DefaultConfig();
  std::string config_text;
  if (!opt.config_path.empty()) {
    config = randcheck::harness::LoadConfig(opt.config_path);
    config_text = randcheck::harness::ReadFile(opt.config_path);
  }
  if (opt.seed) {
    config.seeds.global = *opt.seed;
    // Re-validate seed constraints for the new root seed.
    config = randcheck::harness::ParseConfig(randcheck::harness::ToJson(config));
  }
  if (opt.jobs < 1) throw Failure(2, "usage", "--jobs must be >= 1");

  const bool reporting = opt.command == "test-diffinit" || opt.command == "test-untrained" ||
                         opt.command == "report";
  if (reporting) RefuseCompletedReport(opt);
  CreateOutputDir(opt.out_dir);
  Experiment e(std::move(config), opt.out_dir, opt.jobs);
  e.data();  // Surfaces data-dependent config errors before any work.

  if (opt.command == "gen-data") {
    GenData(e);
  } else if (opt.command == "train") {
    Train(e);
  } else if (opt.command == "attribute") {
    Attribute(e);
  } else if (opt.command == "infidelity") {
    Infidelity(e);
  } else if (opt.command == "jaccard") {
    Jaccard(e);
  } else {
    randcheck::harness::Report report;
    if (opt.command != "test-untrained") report.diffinit = randcheck::harness::run_test_diffinit(e);
    if (opt.command != "test-diffinit") report.untrained = randcheck::harness::run_test_untrained(e);
    randcheck::harness::assemble_report(e, report, config_text, opt.command);
    std::cout << "report written to " << opt.out_dir << "\n";
    return 0;
  }
  WriteProvenance(e, config_text, opt.command);
  return 0;
}

int Fail(const Options& opt, int code, const std::string& kind, const std::string& message,
         const std::string& field = "") {
  json err = {{"status", "error"}, {"exit_code", code}, {"kind", kind}, {"message", message}};
  if (!opt.command.empty()) err["command"] = opt.command;
  if (!field.empty()) err["field"] = field;
  std::cerr << err.dump() << "\n";
  if (!opt.out_dir.empty() && fs::is_directory(opt.out_dir)) {
    try {
      randcheck::harness::WriteFileAtomic(fs::path(opt.out_dir) / "error.json", err.dump(2) + "\n");
    } catch (...) {
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"randcheck: randomization sanity checks for token attribution methods"};
  app.require_subcommand(1);
  app.footer("\n" + randcheck::harness::ConfigHelp());
  Options opt;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-data", "build the corpus, split and vocabulary"},
      {"train", "train the shared encoder and the FirstInit/SecondInit/RandInit variants"},
      {"attribute", "compute attributions for every variant and method"},
      {"infidelity", "write mean infidelity tables"},
      {"jaccard", "write Jaccard@K% tables"},
      {"test-diffinit", "run the different-initialization test and write a report"},
      {"test-untrained", "run the untrained-model test and write a report"},
      {"report", "run both tests and write the full report"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config_path, "experiment config (JSON); defaults apply when omitted");
    sub->add_option("--out", opt.out_dir, "output directory")->required();
    sub->add_option("--seed", opt.seed, "global seed, overrides seeds.global");
    sub->add_option("--jobs", opt.jobs, "document-level worker threads")->capture_default_str();
    sub->add_flag("--force", opt.force, "overwrite a completed report");
    sub->footer("\n" + randcheck::harness::ConfigHelp());
    sub->callback([&opt, name = name] { opt.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail(opt, 2, "usage", e.what());
  }

  try {
    return Run(opt);
  } catch (const randcheck::ConfigError& e) {
    return Fail(opt, 2, "config", e.what(), e.field());
  } catch (const Failure& e) {
    return Fail(opt, e.code(), e.kind(), e.what());
  } catch (const randcheck::IngestionError& e) {
    return Fail(opt, 1, "ingestion", e.what());
  } catch (const randcheck::TrainingError& e) {
    return Fail(opt, 1, "training", e.what());
  } catch (const std::exception& e) {
    return Fail(opt, 1, "runtime", e.what());
  }
}
