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

// Classification metrics, ROC data and fold aggregation.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lesionfuse/data_model.hpp"

namespace lesionfuse {

/// Square count matrix; rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = kNumClasses)
      : n_(classes), counts_(classes * classes, 0) {}
  ConfusionMatrix(std::initializer_list<std::initializer_list<std::size_t>> rows);

  std::size_t classes() const { return n_; }
  std::size_t& at(std::size_t truth, std::size_t predicted) { return counts_.at(truth * n_ + predicted); }
  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts_.at(truth * n_ + predicted);
  }
  std::size_t row_sum(std::size_t truth) const;
  std::size_t col_sum(std::size_t predicted) const;
  std::size_t total() const;
  std::size_t trace() const;
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 std::size_t classes = kNumClasses);

double accuracy(const ConfusionMatrix& m);

/// Mean per-class recall over classes with at least one true sample.
double balanced_accuracy(const ConfusionMatrix& m);

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Per-class scores averaged with true-class support weights. A class that is
/// never predicted has precision 0.
PrecisionRecallF1 weighted_prf(const ConfusionMatrix& m);

/// Probability of a random positive outscoring a random negative, ties
/// counted as one half.
double binary_auc(std::span<const double> scores, std::span<const bool> positive);

struct RocCurve {
  /// (false-positive rate, true-positive rate) from (0, 0) to (1, 1).
  std::vector<std::pair<double, double>> points;
  std::optional<double> auc;
};

RocCurve roc_curve(std::span<const double> scores, std::span<const bool> positive);

/// Rows of class probabilities, one per sample.
using ProbabilityRows = std::vector<std::vector<double>>;

struct MacroAuc {
  double macro = 0.0;
  std::vector<std::optional<double>> per_class;
  std::vector<std::string> warnings;
};

/// One-vs-rest AUC per class, averaged over classes that have both positive
/// and negative samples. Throws when fewer than two classes are present.
MacroAuc auc_ovr(const ProbabilityRows& probabilities, std::span<const int> truth);
double auc_macro_ovr(const ProbabilityRows& probabilities, std::span<const int> truth);

/// Index of the largest probability; ties go to the lower index.
int argmax(std::span<const double> row);

inline constexpr std::array<const char*, 6> kMetricNames = {"ACC", "BACC", "P", "R", "F1", "AUC"};

struct MetricsReport {
  double acc = 0.0;
  double bacc = 0.0;
  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double f1_weighted = 0.0;
  double auc = 0.0;
  ConfusionMatrix confusion;
  std::vector<RocCurve> roc;
  /// Mean predicted probability vector per true class; empty when the class
  /// has no samples.
  std::vector<std::vector<double>> prob_dists;
  std::vector<std::string> warnings;

  /// Metrics in table order ACC, BACC, P, R, F1, AUC.
  std::array<double, 6> metric_values() const {
    return {acc, bacc, precision_weighted, recall_weighted, f1_weighted, auc};
  }
};

MetricsReport evaluate_predictions(const ProbabilityRows& probabilities, std::span<const int> truth,
                                   std::size_t classes = kNumClasses);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
};

struct AggregateRow {
  std::string model;
  std::string scenario;
  double cf = 0.0;
  std::size_t folds = 0;
  std::array<MetricSummary, 6> metrics{};
};

/// Mean and sample standard deviation of each metric across fold reports.
AggregateRow aggregate_folds(std::span<const MetricsReport> reports);

MetricSummary summarize(std::span<const double> values);

/// "0.750 ± 0.033"
std::string format_summary(const MetricSummary& s, int digits = 3);

}  // namespace lesionfuse
