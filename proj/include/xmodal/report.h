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

#ifndef XMODAL_REPORT_H_
#define XMODAL_REPORT_H_

#include <filesystem>
#include <string>

#include "json.hpp"
#include "xmodal/trainer.h"

namespace xmodal {

enum class ReportFormat { kJson, kCsv, kMarkdown };

inline constexpr int kReportSchemaVersion = 1;

nlohmann::json RunReportToJson(const RunReport& report);
RunReport RunReportFromJson(const nlohmann::json& j);
nlohmann::json ComparisonToJson(const ComparisonTable& table);

// Two-space indented JSON with a trailing newline.
std::string RenderJson(const nlohmann::json& j);
// `step,loss_total,loss_AV,loss_VA,loss_AAV,loss_VVA`.
std::string CurveCsv(const RunReport& report);
// One row per evaluation point.
std::string MetricsCsv(const RunReport& report);
std::string MetricsMarkdown(const RunReport& report);
// Method | CBM EER | SV EER for biometric comparisons, Method | R@1 | R@k
// (content probe accuracy) for sync comparisons.
std::string ComparisonMarkdown(const ComparisonTable& table);
std::string ComparisonCsv(const ComparisonTable& table);

void EmitReport(const RunReport& report, ReportFormat format, const std::filesystem::path& path);
void EmitReport(const ComparisonTable& table, ReportFormat format,
                const std::filesystem::path& path);

// Writes `contents` to `path`, throwing Error(kIo) on failure.
void WriteFile(const std::filesystem::path& path, const std::string& contents);
std::string ReadFile(const std::filesystem::path& path);

}  // namespace xmodal

#endif  // XMODAL_REPORT_H_
