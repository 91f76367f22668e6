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

// The two randomization tests run end to end: data, shared encoder, model
// variants, attributions, infidelity and Jaccard@K% tables, plus report
// assembly. Intermediate artifacts are cached under the output directory so
// every stage can resume.

#ifndef RANDCHECK_HARNESS_H_
#define RANDCHECK_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "randcheck/attributions.h"
#include "randcheck/config.h"
#include "randcheck/metrics.h"
#include "randcheck/model.h"
#include "randcheck/text.h"
#include "randcheck/train.h"

namespace randcheck::harness {

using attribution::AttributionOutput;
using attribution::Method;
using attribution::Reduction;
using model::Variant;

// Calls fn(i) for i in [0, n) on up to `jobs` threads. Callers write results
// into slot i, so the outcome does not depend on scheduling.
void ParallelFor(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Writes through a temporary sibling and renames it into place.
void WriteFileAtomic(const std::filesystem::path& path, const std::string& contents);
std::string ReadFile(const std::filesystem::path& path);

// A method together with the reduction applied to it.
struct MethodSpec {
  Method method = Method::kVanilla;
  Reduction reduction = Reduction::kNone;
  // VN, SG, IG for l2; VN-IxG etc. for input_dot_grad; SHP, RND.
  std::string Label() const;
};

std::vector<MethodSpec> MethodSpecs(const EvalOptions& eval);

class Experiment {
 public:
  Experiment(ExperimentConfig config, std::filesystem::path out_dir, int jobs = 1);

  const ExperimentConfig& config() const { return config_; }
  const ResolvedSeeds& seeds() const { return seeds_; }
  const std::filesystem::path& out_dir() const { return out_dir_; }
  int jobs() const { return jobs_; }

  const text::Corpus& corpus();
  const text::Vocab& vocab();
  const text::DatasetSplit& data();
  // Loads checkpoints saved by an earlier run with the same settings, or
  // trains and saves them.
  const model::Variants& variants();
  const model::ModelCheckpoint& checkpoint(Variant variant);

  // Test-set positions of the evaluation subsample, ascending.
  const std::vector<std::size_t>& eval_indices();
  const std::vector<text::TokenizedDoc>& eval_docs();

  // Chosen on FirstInit, reused for every variant.
  const attribution::SigmaSelection& sg_sigma();

  // One attribution per evaluation document, in eval_docs() order.
  const std::vector<AttributionOutput>& attributions(Variant variant, const MethodSpec& spec);
  const std::vector<metrics::InfidelityResult>& infidelities(Variant variant,
                                                             const MethodSpec& spec);

  // Seed for a per-document random stream of a method.
  std::uint64_t MethodSeed(Method method, const std::string& doc_id) const;

  // Hash of everything that determines the trained checkpoints.
  std::uint64_t TrainingKey() const;

 private:
  AttributionOutput Compute(const model::ModelCheckpoint& ckpt, const text::TokenizedDoc& doc,
                            const MethodSpec& spec, double sigma);

  ExperimentConfig config_;
  ResolvedSeeds seeds_;
  std::filesystem::path out_dir_;
  int jobs_;
  std::optional<text::Corpus> corpus_;
  std::optional<text::Vocab> vocab_;
  std::optional<text::DatasetSplit> data_;
  std::optional<model::Variants> variants_;
  std::optional<std::vector<std::size_t>> eval_indices_;
  std::optional<std::vector<text::TokenizedDoc>> eval_docs_;
  std::optional<attribution::SigmaSelection> sigma_;
  std::map<std::string, std::vector<AttributionOutput>> attributions_;
  std::map<std::string, std::vector<metrics::InfidelityResult>> infidelities_;
};

// method label -> cell name -> value.
using CellTable = std::map<std::string, std::map<std::string, double>>;

struct UnitsCount {
  std::string method;
  std::size_t count = 0;
  std::size_t total = 0;
};

// Cells with |a - b| <= units, per method. Both tables must have the same
// methods and cells.
std::vector<UnitsCount> within_units_count(const CellTable& a, const CellTable& b,
                                           double units = 10.0);

// Rows `method,cell,value` with a header line.
CellTable ReadCellTable(const std::filesystem::path& path);

struct PerDocRow {
  std::string doc_id;
  std::string model;
  std::string method;
  std::string metric;
  double value = 0.0;
};

struct JaccardTable {
  std::string name;
  std::vector<double> k_percent;
  std::vector<std::string> methods;
  // cells[m][k]: mean Jaccard in [0, 1] over the agreeing documents.
  std::vector<std::vector<double>> cells;
  std::size_t documents = 0;

  // Percent scale, cells named "K=<k>".
  CellTable AsCells() const;
};

struct InfidelityTable {
  std::string variant;
  std::vector<std::string> methods;
  std::vector<metrics::InfidelitySummary> summaries;
};

struct DiffInitSection {
  double accuracy_first = 0.0;
  double accuracy_second = 0.0;
  double overlap = 0.0;
  std::size_t eval_documents = 0;
  std::size_t agreeing_documents = 0;
  JaccardTable jaccard;
  InfidelityTable infidelity_first;
  InfidelityTable infidelity_second;
  std::vector<PerDocRow> per_doc;
};

struct UntrainedSection {
  double accuracy_first = 0.0;
  double accuracy_rand = 0.0;
  double overlap = 0.0;
  std::size_t eval_documents = 0;
  std::size_t agreeing_documents = 0;
  // RandInit predicted a single class for every evaluation document; its
  // infidelities are then all censored and carry no information.
  bool constant_prediction = false;
  JaccardTable jaccard;
  InfidelityTable infidelity_first;
  InfidelityTable infidelity_rand;
  std::vector<PerDocRow> per_doc;
};

DiffInitSection run_test_diffinit(Experiment& experiment);
UntrainedSection run_test_untrained(Experiment& experiment);

struct Report {
  std::optional<DiffInitSection> diffinit;
  std::optional<UntrainedSection> untrained;
};

// Writes report.json, tables/*.csv, figures/*.svg, per_doc_metrics.csv and
// provenance.json. At least one section is required; a missing one is
// recorded as a gap.
nlohmann::json assemble_report(Experiment& experiment, const Report& report,
                               const std::string& config_text = "",
                               const std::string& command = "report");

// Config, resolved seeds, library versions and a finish timestamp.
nlohmann::json Provenance(Experiment& experiment, const std::string& config_text,
                          const std::string& command);

// ISO 8601, seconds resolution.
std::string UtcTimestamp();

// Table writers, exposed for the individual CLI stages.
std::string InfidelityCsv(const std::vector<const InfidelityTable*>& tables);
std::string JaccardCsv(const JaccardTable& table);
std::string PerDocCsv(const std::vector<PerDocRow>& rows);
std::string WithinUnitsCsv(const std::vector<UnitsCount>& counts, double units);

// SVG grouped bar chart: one group per category, one bar per series.
std::string BarChartSvg(const std::string& title, const std::vector<std::string>& categories,
                        const std::vector<std::string>& series,
                        const std::vector<std::vector<double>>& values, double max_value);

}  // namespace randcheck::harness

#endif  // RANDCHECK_HARNESS_H_
