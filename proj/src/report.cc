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
#include <chrono>
#include <cmath>
#include <ctime>
#include <sstream>

#include <Eigen/Core>

#include "randcheck/csv.h"
#include "randcheck/errors.h"
#include "randcheck/format.h"
#include "randcheck/harness.h"
#include "randcheck/random.h"

#ifndef RANDCHECK_VERSION
#define RANDCHECK_VERSION "unknown"
#endif

namespace randcheck::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string UtcNow() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string Number(double value) { return std::isnan(value) ? "" : FormatDouble(value); }

json NumberJson(double value) { return std::isnan(value) ? json(nullptr) : json(value); }

std::string XmlEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

json InfidelityJson(const InfidelityTable& t) {
  json rows = json::array();
  for (std::size_t i = 0; i < t.methods.size(); ++i) {
    const metrics::InfidelitySummary& s = t.summaries[i];
    rows.push_back({{"method", t.methods[i]},
                    {"mean_infidelity", s.mean},
                    {"mean_flipped_only", NumberJson(s.mean_flipped_only)},
                    {"censored", s.censored},
                    {"documents", s.count}});
  }
  return {{"variant", t.variant}, {"rows", rows}};
}

json JaccardJson(const JaccardTable& t) {
  json rows = json::array();
  for (std::size_t m = 0; m < t.methods.size(); ++m) {
    json row = {{"method", t.methods[m]}};
    for (std::size_t k = 0; k < t.k_percent.size(); ++k) {
      row["jaccard@" + FormatDouble(t.k_percent[k])] = NumberJson(t.cells[m][k]);
    }
    rows.push_back(std::move(row));
  }
  return {{"pair", t.name}, {"documents", t.documents}, {"rows", rows}};
}

std::string Slug(const std::string& variant) {
  std::string out;
  for (char c : variant) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace

std::string UtcTimestamp() { return UtcNow(); }

std::string InfidelityCsv(const std::vector<const InfidelityTable*>& tables) {
  std::string out = "variant,method,mean_infidelity,mean_flipped_only,censored,documents\n";
  for (const InfidelityTable* t : tables) {
    for (std::size_t i = 0; i < t->methods.size(); ++i) {
      const metrics::InfidelitySummary& s = t->summaries[i];
      out += csv::JoinRow({t->variant, t->methods[i], Number(s.mean), Number(s.mean_flipped_only),
                           std::to_string(s.censored), std::to_string(s.count)},
                          ',') +
             "\n";
    }
  }
  return out;
}

std::string JaccardCsv(const JaccardTable& t) {
  std::vector<std::string> header{"method"};
  for (double k : t.k_percent) header.push_back("jaccard@" + FormatDouble(k));
  header.push_back("documents");
  std::string out = csv::JoinRow(header, ',') + "\n";
  for (std::size_t m = 0; m < t.methods.size(); ++m) {
    std::vector<std::string> row{t.methods[m]};
    for (double v : t.cells[m]) row.push_back(Number(100.0 * v));
    row.push_back(std::to_string(t.documents));
    out += csv::JoinRow(row, ',') + "\n";
  }
  return out;
}

std::string PerDocCsv(const std::vector<PerDocRow>& rows) {
  std::string out = "doc_id,model,method,metric,value\n";
  for (const PerDocRow& r : rows) {
    out += csv::JoinRow({r.doc_id, r.model, r.method, r.metric, Number(r.value)}, ',') + "\n";
  }
  return out;
}

std::string WithinUnitsCsv(const std::vector<UnitsCount>& counts, double units) {
  std::string out = "method,within,total,units\n";
  for (const UnitsCount& c : counts) {
    out += csv::JoinRow({c.method, std::to_string(c.count), std::to_string(c.total),
                         FormatDouble(units)},
                        ',') +
           "\n";
  }
  return out;
}

std::string BarChartSvg(const std::string& title, const std::vector<std::string>& categories,
                        const std::vector<std::string>& series,
                        const std::vector<std::vector<double>>& values, double max_value) {
  static const char* kColors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3"};
  const double bar = 18.0;
  const double gap = 14.0;
  const double left = 50.0;
  const double top = 40.0;
  const double plot_h = 220.0;
  const double group_w = bar * static_cast<double>(series.size()) + gap;
  const double width = left + group_w * static_cast<double>(categories.size()) + 140.0;
  const double height = top + plot_h + 50.0;
  if (!(max_value > 0.0)) max_value = 1.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << FormatFixed(width, 0)
      << "\" height=\"" << FormatFixed(height, 0) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<text x=\"" << FormatFixed(left, 0) << "\" y=\"20\" font-size=\"14\">" << XmlEscape(title)
      << "</text>\n";
  const double base = top + plot_h;
  svg << "<line x1=\"" << FormatFixed(left, 0) << "\" y1=\"" << FormatFixed(base, 0) << "\" x2=\""
      << FormatFixed(width - 140.0, 0) << "\" y2=\"" << FormatFixed(base, 0)
      << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = max_value * tick / 4.0;
    const double y = base - plot_h * tick / 4.0;
    svg << "<text x=\"" << FormatFixed(left - 6.0, 0) << "\" y=\"" << FormatFixed(y + 4.0, 1)
        << "\" text-anchor=\"end\">" << FormatFixed(v, 0) << "</text>\n";
  }
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double x0 = left + gap / 2.0 + group_w * static_cast<double>(c);
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = values[s][c];
      if (std::isnan(v)) continue;
      const double h = plot_h * std::clamp(v / max_value, 0.0, 1.0);
      svg << "<rect x=\"" << FormatFixed(x0 + bar * static_cast<double>(s), 1) << "\" y=\""
          << FormatFixed(base - h, 1) << "\" width=\"" << FormatFixed(bar - 2.0, 1)
          << "\" height=\"" << FormatFixed(h, 1) << "\" fill=\"" << kColors[s % 5] << "\"><title>"
          << XmlEscape(series[s] + " " + categories[c] + ": " + FormatFixed(v, 2))
          << "</title></rect>\n";
    }
    svg << "<text x=\"" << FormatFixed(x0 + bar * static_cast<double>(series.size()) / 2.0, 1)
        << "\" y=\"" << FormatFixed(base + 16.0, 0) << "\" text-anchor=\"middle\">"
        << XmlEscape(categories[c]) << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = top + 16.0 * static_cast<double>(s);
    svg << "<rect x=\"" << FormatFixed(width - 130.0, 0) << "\" y=\"" << FormatFixed(y, 0)
        << "\" width=\"10\" height=\"10\" fill=\"" << kColors[s % 5] << "\"/>";
    svg << "<text x=\"" << FormatFixed(width - 115.0, 0) << "\" y=\"" << FormatFixed(y + 9.0, 0)
        << "\">" << XmlEscape(series[s]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

json Provenance(Experiment& e, const std::string& config_text, const std::string& command) {
  const json config = ToJson(e.config());
  const ResolvedSeeds& seeds = e.seeds();
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(Fnv1a(config.dump())));
  return {{"command", command},
          {"config", config},
          {"config_text", config_text},
          {"config_hash", hash},
          {"seeds",
           {{"global", e.config().seeds.global},
            {"data", seeds.data},
            {"encoder", seeds.encoder},
            {"pretrain_head", seeds.pretrain_head},
            {"first_head", seeds.first_head},
            {"second_head", seeds.second_head},
            {"rand_head", seeds.rand_head},
            {"shuffle", seeds.shuffle},
            {"methods", seeds.methods}}},
          {"versions",
           {{"randcheck", RANDCHECK_VERSION},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                          std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__}}},
          {"jobs", e.jobs()},
          {"finished_utc", UtcNow()}};
}

json assemble_report(Experiment& e, const Report& report, const std::string& config_text,
                     const std::string& command) {
  if (!report.diffinit && !report.untrained) {
    throw ContractError("assemble_report: no sections to assemble");
  }
  const std::string started = UtcNow();
  const fs::path out = e.out_dir();
  const fs::path tables = out / "tables";
  const fs::path figures = out / "figures";
  fs::create_directories(tables);
  fs::create_directories(figures);
  const EvalOptions& eval = e.config().eval;
  json notes = json::array();
  json files = json::array();
  auto write = [&](const fs::path& rel, const std::string& text) {
    WriteFileAtomic(out / rel, text);
    files.push_back(rel.generic_string());
  };

  notes.push_back(
      "Infidelity is the percentage of tokens replaced by <unk>, in decreasing attribution "
      "order, before the prediction changes. Documents that never change are censored at 100; "
      "mean_infidelity includes them and mean_flipped_only leaves them out.");
  notes.push_back(
      "Ties in attribution scores are broken toward the earlier token position, both for the "
      "drop order and for top-K% sets.");
  notes.push_back(
      "Jaccard@K% is computed over token positions on documents where both models predict "
      "the same class. RND is omitted from Jaccard tables because its scores do not depend on "
      "the model.");

  // Accuracy and overlap.
  {
    std::string acc = "variant,accuracy\n";
    std::string overlap = "pair,test_overlap,agreeing_eval_documents,eval_documents\n";
    if (report.diffinit) {
      acc += "FirstInit," + Number(report.diffinit->accuracy_first) + "\n";
      acc += "SecondInit," + Number(report.diffinit->accuracy_second) + "\n";
      overlap += "FirstInit|SecondInit," + Number(report.diffinit->overlap) + "," +
                 std::to_string(report.diffinit->agreeing_documents) + "," +
                 std::to_string(report.diffinit->eval_documents) + "\n";
    }
    if (report.untrained) {
      if (!report.diffinit) acc += "FirstInit," + Number(report.untrained->accuracy_first) + "\n";
      acc += "RandInit," + Number(report.untrained->accuracy_rand) + "\n";
      overlap += "FirstInit|RandInit," + Number(report.untrained->overlap) + "," +
                 std::to_string(report.untrained->agreeing_documents) + "," +
                 std::to_string(report.untrained->eval_documents) + "\n";
    }
    write("tables/accuracy.csv", acc);
    write("tables/prediction_overlap.csv", overlap);
  }

  // Infidelity tables: FirstInit once, then the other variants.
  std::vector<const InfidelityTable*> infid;
  if (report.diffinit) {
    infid.push_back(&report.diffinit->infidelity_first);
    infid.push_back(&report.diffinit->infidelity_second);
  }
  if (report.untrained) {
    if (!report.diffinit) infid.push_back(&report.untrained->infidelity_first);
    infid.push_back(&report.untrained->infidelity_rand);
  }
  for (const InfidelityTable* t : infid) {
    write("tables/infidelity_" + Slug(t->variant) + ".csv", InfidelityCsv({t}));
  }
  {
    std::vector<std::string> series;
    std::vector<std::vector<double>> values;
    for (const InfidelityTable* t : infid) {
      series.push_back(t->variant);
      std::vector<double> v;
      for (const metrics::InfidelitySummary& s : t->summaries) v.push_back(s.mean);
      values.push_back(std::move(v));
    }
    write("figures/infidelity.svg",
          BarChartSvg("Mean infidelity (%)", infid.front()->methods, series, values, 100.0));
  }

  if (e.config().eval.methods.end() !=
      std::find(eval.methods.begin(), eval.methods.end(), Method::kSmoothGrad)) {
    const attribution::SigmaSelection& sel = e.sg_sigma();
    std::string text = "sigma,mean_infidelity,selected\n";
    for (std::size_t i = 0; i < eval.sg_sigma_grid.size(); ++i) {
      text += FormatDouble(eval.sg_sigma_grid[i]) + "," + Number(sel.mean_infidelity[i]) + "," +
              (eval.sg_sigma_grid[i] == sel.sigma ? "1" : "0") + "\n";
    }
    write("tables/sg_sigma.csv", text);
  }

  std::vector<const JaccardTable*> jaccards;
  if (report.diffinit) {
    write("tables/jaccard_firstinit_secondinit.csv", JaccardCsv(report.diffinit->jaccard));
    jaccards.push_back(&report.diffinit->jaccard);
  }
  if (report.untrained) {
    write("tables/jaccard_firstinit_randinit.csv", JaccardCsv(report.untrained->jaccard));
    jaccards.push_back(&report.untrained->jaccard);
  }
  for (std::size_t k = 0; k < eval.k_percent.size(); ++k) {
    std::vector<std::string> series;
    std::vector<std::vector<double>> values;
    for (const JaccardTable* t : jaccards) {
      series.push_back(t->name);
      std::vector<double> v;
      for (const auto& row : t->cells) v.push_back(100.0 * row[k]);
      values.push_back(std::move(v));
    }
    const std::string kname = FormatDouble(eval.k_percent[k]);
    write("figures/jaccard_at_" + kname + ".svg",
          BarChartSvg("Mean Jaccard@" + kname + "% (%)", jaccards.front()->methods, series,
                      values, 100.0));
  }

  json within = nullptr;
  if (report.diffinit && report.untrained) {
    const std::vector<UnitsCount> counts = within_units_count(
        report.diffinit->jaccard.AsCells(), report.untrained->jaccard.AsCells(), eval.within_units);
    write("tables/within_units.csv", WithinUnitsCsv(counts, eval.within_units));
    within = json::array();
    for (const UnitsCount& c : counts) {
      within.push_back({{"method", c.method}, {"within", c.count}, {"total", c.total}});
    }
    notes.push_back(
        "Within-units counts compare FirstInit|SecondInit against FirstInit|RandInit Jaccard "
        "cells on the percent scale. Published counts run over 16 cells (4 datasets x 4 "
        "encoders); this run has one corpus and one encoder, so its cells are the configured "
        "K% values.");
  }

  std::vector<PerDocRow> per_doc;
  if (report.diffinit) per_doc = report.diffinit->per_doc;
  if (report.untrained) {
    for (const PerDocRow& r : report.untrained->per_doc) {
      // FirstInit infidelities are shared with the other section.
      if (report.diffinit && r.model == "FirstInit") continue;
      per_doc.push_back(r);
    }
  }
  write("per_doc_metrics.csv", PerDocCsv(per_doc));

  json sections;
  if (report.diffinit) {
    const DiffInitSection& s = *report.diffinit;
    sections["diffinit"] = {{"accuracy", {{"FirstInit", s.accuracy_first}, {"SecondInit", s.accuracy_second}}},
                            {"prediction_overlap", s.overlap},
                            {"eval_documents", s.eval_documents},
                            {"agreeing_documents", s.agreeing_documents},
                            {"infidelity", {InfidelityJson(s.infidelity_first), InfidelityJson(s.infidelity_second)}},
                            {"jaccard", JaccardJson(s.jaccard)}};
  } else {
    sections["diffinit"] = nullptr;
    notes.push_back("The different-initialization test was not run; its tables are absent.");
  }
  if (report.untrained) {
    const UntrainedSection& s = *report.untrained;
    sections["untrained"] = {{"accuracy", {{"FirstInit", s.accuracy_first}, {"RandInit", s.accuracy_rand}}},
                             {"prediction_overlap", s.overlap},
                             {"eval_documents", s.eval_documents},
                             {"agreeing_documents", s.agreeing_documents},
                             {"constant_prediction", s.constant_prediction},
                             {"infidelity", {InfidelityJson(s.infidelity_first), InfidelityJson(s.infidelity_rand)}},
                             {"jaccard", JaccardJson(s.jaccard)}};
    if (s.constant_prediction) {
      notes.push_back(
          "RandInit predicts a single class for every evaluation document, so every "
          "infidelity is censored at 100. Its infidelity table is excluded from method "
          "comparisons.");
    }
  } else {
    sections["untrained"] = nullptr;
    notes.push_back("The untrained-model test was not run; its tables are absent.");
  }

  const model::Variants& v = e.variants();
  json training = {{"EncoderPretrain", {{"learning_rate", v.pretrain_log.learning_rate}, {"best_epoch", v.pretrain_log.best_epoch}}},
                   {"FirstInit", {{"learning_rate", v.first_log.learning_rate}, {"best_epoch", v.first_log.best_epoch}}},
                   {"SecondInit", {{"learning_rate", v.second_log.learning_rate}, {"best_epoch", v.second_log.best_epoch}}}};
  json result = {{"format", "randcheck-report"},
                 {"version", 1},
                 {"sections", sections},
                 {"within_units", within},
                 {"training", training},
                 {"sg_sigma", std::find(eval.methods.begin(), eval.methods.end(), Method::kSmoothGrad) !=
                                      eval.methods.end()
                                  ? json(e.sg_sigma().sigma)
                                  : json(nullptr)},
                 {"notes", notes},
                 {"files", files}};

  json provenance = Provenance(e, config_text, command);
  provenance["started_utc"] = started;
  WriteFileAtomic(out / "provenance.json", provenance.dump(2) + "\n");
  WriteFileAtomic(out / "report.json", result.dump(2) + "\n");
  return result;
}

}  // namespace randcheck::harness
