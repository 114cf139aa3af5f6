// Copyright 2026 The xmodal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xmodal/report.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "xmodal/error.h"

namespace xmodal {

using nlohmann::json;

namespace {

json MetricsToJson(const MetricsPoint& m) {
  return {{"step", m.step},
          {"seed", m.seed},
          {"cbm_eer", m.cbm_eer},
          {"sv_eer", m.sv_eer},
          {"visual_eer", m.visual_eer},
          {"recall_at_1", m.recall_at_1},
          {"recall_at_k", m.recall_at_k},
          {"recall_k", m.recall_k},
          {"probe_top1", m.probe_top1},
          {"probe_topk", m.probe_topk},
          {"probe_k", m.probe_k}};
}

MetricsPoint MetricsFromJson(const json& j) {
  MetricsPoint m;
  m.step = j.at("step");
  m.seed = j.at("seed");
  m.cbm_eer = j.at("cbm_eer");
  m.sv_eer = j.at("sv_eer");
  m.visual_eer = j.at("visual_eer");
  m.recall_at_1 = j.at("recall_at_1");
  m.recall_at_k = j.at("recall_at_k");
  m.recall_k = j.at("recall_k");
  m.probe_top1 = j.at("probe_top1");
  m.probe_topk = j.at("probe_topk");
  m.probe_k = j.at("probe_k");
  return m;
}

// Shortest representation that round-trips.
std::string Num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string Percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * v);
  return buf;
}

}  // namespace

json RunReportToJson(const RunReport& report) {
  json curve = json::array();
  for (const auto& p : report.curve)
    curve.push_back({{"step", p.step},
                     {"loss_total", p.total},
                     {"loss_AV", p.av},
                     {"loss_VA", p.va},
                     {"loss_AAV", p.aav},
                     {"loss_VVA", p.vva}});
  json metrics = json::array();
  for (const auto& m : report.metrics) metrics.push_back(MetricsToJson(m));
  return {{"format", "xmodal-run-report"},
          {"schema_version", kReportSchemaVersion},
          {"config", ConfigToJson(report.config)},
          {"checkpoint", report.checkpoint},
          {"curve", curve},
          {"metrics", metrics}};
}

RunReport RunReportFromJson(const json& j) {
  try {
    if (j.at("format") != "xmodal-run-report" || j.at("schema_version") != kReportSchemaVersion)
      throw Error(ErrorKind::kConfig, "not a version-1 run report");
    RunReport r;
    r.config = ConfigFromJson(j.at("config"));
    r.checkpoint = j.at("checkpoint");
    for (const auto& p : j.at("curve"))
      r.curve.push_back({p.at("step"), p.at("loss_total"), p.at("loss_AV"), p.at("loss_VA"),
                         p.at("loss_AAV"), p.at("loss_VVA")});
    for (const auto& m : j.at("metrics")) r.metrics.push_back(MetricsFromJson(m));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("malformed run report: ") + e.what());
  }
}

json ComparisonToJson(const ComparisonTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows)
    rows.push_back({{"method", r.method}, {"seed", r.seed}, {"metrics", MetricsToJson(r.final_metrics)}});
  json summary = json::array();
  for (const auto& s : table.summary)
    summary.push_back({{"method", s.method},
                       {"mean", MetricsToJson(s.mean)},
                       {"sv_eer_delta", s.sv_eer_delta},
                       {"cbm_eer_delta", s.cbm_eer_delta},
                       {"probe_top1_delta", s.probe_top1_delta},
                       {"sv_wins", s.sv_wins},
                       {"probe_wins", s.probe_wins}});
  return {{"format", "xmodal-comparison"},
          {"schema_version", kReportSchemaVersion},
          {"task", ToString(table.task)},
          {"seeds", table.seeds},
          {"rows", rows},
          {"summary", summary}};
}

std::string RenderJson(const json& j) { return j.dump(2) + "\n"; }

std::string CurveCsv(const RunReport& report) {
  std::string out = "step,loss_total,loss_AV,loss_VA,loss_AAV,loss_VVA\n";
  for (const auto& p : report.curve)
    out += std::to_string(p.step) + "," + Num(p.total) + "," + Num(p.av) + "," + Num(p.va) + "," +
           Num(p.aav) + "," + Num(p.vva) + "\n";
  return out;
}

std::string MetricsCsv(const RunReport& report) {
  std::string out =
      "step,seed,cbm_eer,sv_eer,visual_eer,recall_at_1,recall_at_k,recall_k,probe_top1,"
      "probe_topk,probe_k\n";
  for (const auto& m : report.metrics)
    out += std::to_string(m.step) + "," + std::to_string(m.seed) + "," + Num(m.cbm_eer) + "," +
           Num(m.sv_eer) + "," + Num(m.visual_eer) + "," + Num(m.recall_at_1) + "," +
           Num(m.recall_at_k) + "," + std::to_string(m.recall_k) + "," + Num(m.probe_top1) + "," +
           Num(m.probe_topk) + "," + std::to_string(m.probe_k) + "\n";
  return out;
}

std::string MetricsMarkdown(const RunReport& report) {
  std::string out =
      "| Step | CBM EER | SV EER | Visual EER | R@1 | R@K | Probe top-1 | Probe top-K |\n"
      "|---:|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& m : report.metrics)
    out += "| " + std::to_string(m.step) + " | " + Percent(m.cbm_eer) + " | " + Percent(m.sv_eer) +
           " | " + Percent(m.visual_eer) + " | " + Percent(m.recall_at_1) + " | " +
           Percent(m.recall_at_k) + " | " + Percent(m.probe_top1) + " | " +
           Percent(m.probe_topk) + " |\n";
  return out;
}

std::string ComparisonMarkdown(const ComparisonTable& table) {
  std::string out;
  if (table.task == Task::kBiometric) {
    out = "| Method | CBM EER | SV EER |\n|:---|---:|---:|\n";
    for (const auto& s : table.summary)
      out += "| " + s.method + " | " + Percent(s.mean.cbm_eer) + " | " + Percent(s.mean.sv_eer) +
             " |\n";
    return out;
  }
  const std::size_t k = table.summary.empty() ? 0 : table.summary.front().mean.probe_k;
  out = "| Method | R@1 | R@" + std::to_string(k) + " |\n|:---|---:|---:|\n";
  for (const auto& s : table.summary)
    out += "| " + s.method + " | " + Percent(s.mean.probe_top1) + " | " +
           Percent(s.mean.probe_topk) + " |\n";
  return out;
}

std::string ComparisonCsv(const ComparisonTable& table) {
  std::string out = "method,seed,cbm_eer,sv_eer,visual_eer,recall_at_1,recall_at_k,probe_top1,probe_topk\n";
  for (const auto& r : table.rows) {
    const MetricsPoint& m = r.final_metrics;
    out += r.method + "," + std::to_string(r.seed) + "," + Num(m.cbm_eer) + "," + Num(m.sv_eer) +
           "," + Num(m.visual_eer) + "," + Num(m.recall_at_1) + "," + Num(m.recall_at_k) + "," +
           Num(m.probe_top1) + "," + Num(m.probe_topk) + "\n";
  }
  return out;
}

void WriteFile(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << contents;
  out.close();
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void EmitReport(const RunReport& report, ReportFormat format, const std::filesystem::path& path) {
  switch (format) {
    case ReportFormat::kJson:
      return WriteFile(path, RenderJson(RunReportToJson(report)));
    case ReportFormat::kCsv:
      return WriteFile(path, CurveCsv(report));
    case ReportFormat::kMarkdown:
      return WriteFile(path, MetricsMarkdown(report));
  }
}

void EmitReport(const ComparisonTable& table, ReportFormat format,
                const std::filesystem::path& path) {
  switch (format) {
    case ReportFormat::kJson:
      return WriteFile(path, RenderJson(ComparisonToJson(table)));
    case ReportFormat::kCsv:
      return WriteFile(path, ComparisonCsv(table));
    case ReportFormat::kMarkdown:
      return WriteFile(path, ComparisonMarkdown(table));
  }
}

}  // namespace xmodal
