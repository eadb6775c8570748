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

#include "lesionfuse/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <fmt/format.h>

#include "lesionfuse/error.hpp"

namespace lesionfuse {

ConfusionMatrix::ConfusionMatrix(std::initializer_list<std::initializer_list<std::size_t>> rows)
    : ConfusionMatrix(rows.size()) {
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != n_) throw InvalidArgument("confusion matrix must be square");
    std::size_t j = 0;
    for (auto v : row) at(i, j++) = v;
    ++i;
  }
}

std::size_t ConfusionMatrix::row_sum(std::size_t t) const {
  std::size_t s = 0;
  for (std::size_t j = 0; j < n_; ++j) s += at(t, j);
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t p) const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < n_; ++i) s += at(i, p);
  return s;
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < n_; ++i) s += at(i, i);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 std::size_t classes) {
  if (truth.size() != predicted.size())
    throw InvalidArgument("confusion_matrix: label sequences differ in length");
  ConfusionMatrix m(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= classes ||
        static_cast<std::size_t>(p) >= classes)
      throw InvalidArgument(fmt::format("confusion_matrix: label outside [0, {})", classes));
    ++m.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
  }
  return m;
}

double accuracy(const ConfusionMatrix& m) {
  const auto total = m.total();
  if (total == 0) throw InvalidArgument("accuracy: empty confusion matrix");
  return static_cast<double>(m.trace()) / static_cast<double>(total);
}

double balanced_accuracy(const ConfusionMatrix& m) {
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < m.classes(); ++c) {
    const auto support = m.row_sum(c);
    if (support == 0) continue;
    sum += static_cast<double>(m.at(c, c)) / static_cast<double>(support);
    ++present;
  }
  if (present == 0) throw InvalidArgument("balanced_accuracy: no class has true samples");
  return sum / static_cast<double>(present);
}

PrecisionRecallF1 weighted_prf(const ConfusionMatrix& m) {
  const auto total = m.total();
  if (total == 0) throw InvalidArgument("weighted_prf: empty confusion matrix");
  PrecisionRecallF1 out;
  for (std::size_t c = 0; c < m.classes(); ++c) {
    const auto support = m.row_sum(c);
    if (support == 0) continue;
    const double w = static_cast<double>(support) / static_cast<double>(total);
    const auto predicted = m.col_sum(c);
    const double tp = static_cast<double>(m.at(c, c));
    const double p = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
    const double r = tp / static_cast<double>(support);
    const double f = (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    out.precision += w * p;
    out.recall += w * r;
    out.f1 += w * f;
  }
  return out;
}

double binary_auc(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw InvalidArgument("binary_auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  // Mann-Whitney: sum of average ranks of the positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (positive[order[t]]) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw InvalidArgument("binary_auc: needs both positive and negative samples");
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

RocCurve roc_curve(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw InvalidArgument("roc_curve: length mismatch");
  const std::size_t n = scores.size();
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t n_neg = n - n_pos;
  RocCurve curve;
  if (n_pos == 0 || n_neg == 0) return curve;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  curve.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (positive[order[j]] ? tp : fp) += 1;
      ++j;
    }
    curve.points.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                              static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j;
  }
  curve.auc = binary_auc(scores, positive);
  return curve;
}

int argmax(std::span<const double> row) {
  if (row.empty()) throw InvalidArgument("argmax: empty row");
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

namespace {

std::vector<double> column(const ProbabilityRows& rows, std::size_t c) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.at(c));
  return out;
}

std::size_t class_count(const ProbabilityRows& rows) {
  if (rows.empty()) throw InvalidArgument("auc: no samples");
  for (const auto& r : rows)
    if (r.size() != rows.front().size()) throw InvalidArgument("auc: ragged probability rows");
  return rows.front().size();
}

}  // namespace

MacroAuc auc_ovr(const ProbabilityRows& probabilities, std::span<const int> truth) {
  if (probabilities.size() != truth.size()) throw InvalidArgument("auc: length mismatch");
  const std::size_t classes = class_count(probabilities);
  MacroAuc out;
  out.per_class.resize(classes);
  std::size_t present_classes = 0;
  for (std::size_t c = 0; c < classes; ++c)
    if (std::find(truth.begin(), truth.end(), static_cast<int>(c)) != truth.end()) ++present_classes;
  if (present_classes < 2) throw InvalidArgument("auc: only one class present");

  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<bool> pos_vec;
    for (int t : truth) pos_vec.push_back(t == static_cast<int>(c));
    const auto n_pos = static_cast<std::size_t>(std::count(pos_vec.begin(), pos_vec.end(), true));
    if (n_pos == 0 || n_pos == truth.size()) {
      out.warnings.push_back(fmt::format("class {} has no {} samples; AUC skipped", c,
                                         n_pos == 0 ? "positive" : "negative"));
      continue;
    }
    const std::unique_ptr<bool[]> pos(new bool[pos_vec.size()]);
    std::copy(pos_vec.begin(), pos_vec.end(), pos.get());
    const auto scores = column(probabilities, c);
    const double a = binary_auc(scores, std::span<const bool>(pos.get(), pos_vec.size()));
    out.per_class[c] = a;
    sum += a;
    ++used;
  }
  out.macro = sum / static_cast<double>(used);
  return out;
}

double auc_macro_ovr(const ProbabilityRows& probabilities, std::span<const int> truth) {
  return auc_ovr(probabilities, truth).macro;
}

MetricsReport evaluate_predictions(const ProbabilityRows& probabilities, std::span<const int> truth,
                                   std::size_t classes) {
  if (probabilities.size() != truth.size())
    throw InvalidArgument("evaluate: probabilities and labels differ in length");
  std::vector<int> predicted;
  predicted.reserve(truth.size());
  for (const auto& row : probabilities) {
    if (row.size() != classes) throw InvalidArgument("evaluate: probability row width mismatch");
    predicted.push_back(argmax(row));
  }
  MetricsReport r;
  r.confusion = confusion_matrix(truth, predicted, classes);
  r.acc = accuracy(r.confusion);
  r.bacc = balanced_accuracy(r.confusion);
  const auto prf = weighted_prf(r.confusion);
  r.precision_weighted = prf.precision;
  r.recall_weighted = prf.recall;
  r.f1_weighted = prf.f1;
  const auto auc = auc_ovr(probabilities, truth);
  r.auc = auc.macro;
  r.warnings = auc.warnings;

  r.roc.resize(classes);
  r.prob_dists.assign(classes, {});
  for (std::size_t c = 0; c < classes; ++c) {
    const std::unique_ptr<bool[]> pos(new bool[truth.size()]);
    std::size_t count = 0;
    std::vector<double> mean(classes, 0.0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      pos[i] = truth[i] == static_cast<int>(c);
      if (pos[i]) {
        ++count;
        for (std::size_t k = 0; k < classes; ++k) mean[k] += probabilities[i][k];
      }
    }
    const auto scores = column(probabilities, c);
    r.roc[c] = roc_curve(scores, std::span<const bool>(pos.get(), truth.size()));
    if (count > 0) {
      for (auto& v : mean) v /= static_cast<double>(count);
      r.prob_dists[c] = std::move(mean);
    }
  }
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json confusion = nlohmann::json::array();
  for (std::size_t i = 0; i < r.confusion.classes(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < r.confusion.classes(); ++j) row.push_back(r.confusion.at(i, j));
    confusion.push_back(row);
  }
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& curve : r.roc) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& [fpr, tpr] : curve.points) points.push_back({fpr, tpr});
    roc.push_back({{"points", points},
                   {"auc", curve.auc ? nlohmann::json(*curve.auc) : nlohmann::json(nullptr)}});
  }
  return {{"acc", r.acc},
          {"bacc", r.bacc},
          {"precision_weighted", r.precision_weighted},
          {"recall_weighted", r.recall_weighted},
          {"f1_weighted", r.f1_weighted},
          {"auc", r.auc},
          {"confusion", confusion},
          {"roc", roc},
          {"prob_dists", r.prob_dists},
          {"warnings", r.warnings}};
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.acc = j.at("acc").get<double>();
  r.bacc = j.at("bacc").get<double>();
  r.precision_weighted = j.at("precision_weighted").get<double>();
  r.recall_weighted = j.at("recall_weighted").get<double>();
  r.f1_weighted = j.at("f1_weighted").get<double>();
  r.auc = j.at("auc").get<double>();
  const auto& conf = j.at("confusion");
  r.confusion = ConfusionMatrix(conf.size());
  for (std::size_t i = 0; i < conf.size(); ++i)
    for (std::size_t k = 0; k < conf.size(); ++k) r.confusion.at(i, k) = conf.at(i).at(k).get<std::size_t>();
  for (const auto& c : j.at("roc")) {
    RocCurve curve;
    for (const auto& p : c.at("points")) curve.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    if (!c.at("auc").is_null()) curve.auc = c.at("auc").get<double>();
    r.roc.push_back(std::move(curve));
  }
  r.prob_dists = j.at("prob_dists").get<std::vector<std::vector<double>>>();
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

MetricSummary summarize(std::span<const double> values) {
  if (values.size() < 2) throw InvalidArgument("summarize: need at least two values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

AggregateRow aggregate_folds(std::span<const MetricsReport> reports) {
  if (reports.size() < 2) throw InvalidArgument("aggregate_folds: need at least two fold reports");
  for (const auto& r : reports)
    if (r.confusion.classes() != reports.front().confusion.classes())
      throw InvalidArgument("aggregate_folds: reports have inconsistent class sets");
  AggregateRow row;
  row.folds = reports.size();
  for (std::size_t m = 0; m < 6; ++m) {
    std::vector<double> values;
    for (const auto& r : reports) values.push_back(r.metric_values()[m]);
    row.metrics[m] = summarize(values);
  }
  return row;
}

std::string format_summary(const MetricSummary& s, int digits) {
  return fmt::format("{:.{}f} ± {:.{}f}", s.mean, digits, s.std, digits);
}

}  // namespace lesionfuse
