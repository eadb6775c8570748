/*
 * Copyright 2026 The lesionfuse Authors.
 *
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

// Aggregate tables, plots and statistical comparison for a finished run.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lesionfuse/evaluation.hpp"
#include "lesionfuse/experiment.hpp"
#include "lesionfuse/stats.hpp"

namespace lesionfuse {

inline constexpr std::size_t kBaccMetric = 1;  // index into kMetricNames

struct ReportOptions {
  /// Metric fed to the comparison tests.
  std::size_t metric = kBaccMetric;
  CompareOptions compare;
};

/// Writes report/ under the run directory: metrics tables (markdown, CSV),
/// per-cell SVG plots and, with two or more cells, comparison.json. Output
/// depends only on the persisted metrics, so reruns are byte-identical.
std::vector<std::filesystem::path> emit_reports(const RunArtifacts& artifacts,
                                                const ReportOptions& options = {});

std::string metrics_table_markdown(const RunArtifacts& artifacts);
std::string metrics_table_csv(const RunArtifacts& artifacts);

/// Blocks are (run, fold) pairs completed by every cell; treatments are cells.
ScoreMatrix fold_score_matrix(std::span<const RunArtifacts> runs, std::size_t metric = kBaccMetric);

std::string confusion_svg(const ConfusionMatrix& m, const std::string& title);
/// One panel per class with one curve per fold.
std::string roc_svg(const std::vector<MetricsReport>& folds, const std::string& title);
/// Mean predicted probability per true class, averaged over folds.
std::string probability_svg(const std::vector<MetricsReport>& folds, const std::string& title);

}  // namespace lesionfuse
