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

// Friedman omnibus test and Wilcoxon signed-rank post-hoc comparisons.

#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lesionfuse {

/// Blocks (rows, e.g. folds) by treatments (columns, e.g. model configurations).
struct ScoreMatrix {
  std::vector<std::string> blocks;
  std::vector<std::string> treatments;
  std::vector<std::vector<double>> values;

  std::size_t n_blocks() const { return values.size(); }
  std::size_t n_treatments() const { return treatments.size(); }
  std::vector<double> column(std::size_t treatment) const;
  /// Fills default labels and checks shape, finiteness and size minimums.
  void validate() const;

  static ScoreMatrix from_columns(std::vector<std::string> treatments,
                                  const std::vector<std::vector<double>>& columns);
};

/// CSV with a header of treatment names. A leading column headed "block" or
/// "fold" carries block labels.
ScoreMatrix parse_score_csv(std::istream& in);
ScoreMatrix load_score_csv(const std::filesystem::path& file);
void write_score_csv(std::ostream& out, const ScoreMatrix& m);

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

struct FriedmanResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int df = 0;
  std::vector<double> mean_ranks;
};

/// Rank-based statistic with tie correction and chi-square(k - 1) p-value.
FriedmanResult friedman_test(const ScoreMatrix& m);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double df);

enum class WilcoxonMethod { automatic, exact, approximate };

inline constexpr std::size_t kWilcoxonExactLimit = 20;

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p_value = 1.0;   // two-sided
  std::size_t n = 0;      // non-zero differences
  bool exact = true;
};

/// Zero differences are dropped. Throws InvalidArgument("no information")
/// when every difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMethod method = WilcoxonMethod::automatic);

/// Null distribution of W+ for the given (possibly tied) absolute ranks:
/// probability of each value of 2 * W+, indexed by that doubled value.
std::vector<double> wilcoxon_null_distribution(std::span<const double> ranks);

/// Holm step-down adjusted p-values, same order as the input.
std::vector<double> holm_adjust(std::span<const double> p_values);

struct CompareOptions {
  double alpha_friedman = 0.05;
  double alpha_wilcoxon = 0.01;
  bool holm = false;
  WilcoxonMethod method = WilcoxonMethod::automatic;
};

struct PairwiseResult {
  std::string a;
  std::string b;
  std::optional<WilcoxonResult> test;  // empty when the pair has no information
  double p_value = 1.0;                // Holm-adjusted when enabled
  bool significant = false;
  /// Treatment with the larger mean score.
  std::string better;
  std::string note;
};

struct ComparisonReport {
  std::vector<std::string> treatments;
  std::size_t blocks = 0;
  FriedmanResult friedman;
  CompareOptions options;
  /// Present iff friedman.p_value < alpha_friedman.
  std::optional<std::vector<PairwiseResult>> pairwise;

  const PairwiseResult* find_pair(const std::string& a, const std::string& b) const;
};

ComparisonReport compare_models(const ScoreMatrix& scores, const CompareOptions& options = {});

nlohmann::json to_json(const ComparisonReport& report);

}  // namespace lesionfuse
