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

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "lesionfuse/error.hpp"
#include "lesionfuse/evaluation.hpp"

using namespace lesionfuse;

namespace {

// std::vector<bool> is not contiguous; keep flags in a plain array.
struct Flags {
  explicit Flags(const std::vector<bool>& v) : data(new bool[v.size()]), n(v.size()) {
    std::copy(v.begin(), v.end(), data.get());
  }
  operator std::span<const bool>() const { return {data.get(), n}; }
  std::unique_ptr<bool[]> data;
  std::size_t n;
};

// Oracle: count concordant positive/negative pairs directly.
double pair_count_auc(const std::vector<double>& s, const std::vector<bool>& pos) {
  double hits = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (pos[i] && !pos[j]) {
        pairs += 1.0;
        hits += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return hits / pairs;
}

ProbabilityRows random_rows(std::size_t n, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(1.0, 1.0);
  ProbabilityRows rows(n, std::vector<double>(kNumClasses));
  for (auto& r : rows) {
    double s = 0.0;
    for (auto& v : r) s += (v = g(rng));
    for (auto& v : r) v /= s;
  }
  return rows;
}

std::vector<int> random_labels(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, 5);
  std::vector<int> out(n);
  for (auto& v : out) v = d(rng);
  return out;
}

}  // namespace

TEST(Confusion, Counting) {
  const std::vector<int> t = {0, 0, 1}, p = {0, 1, 1};
  const auto m = confusion_matrix(t, p);
  EXPECT_EQ(m.at(0, 0), 1u);
  EXPECT_EQ(m.at(0, 1), 1u);
  EXPECT_EQ(m.at(1, 0), 0u);
  EXPECT_EQ(m.at(1, 1), 1u);
  EXPECT_EQ(m.total(), 3u);

  EXPECT_EQ(confusion_matrix({}, {}).total(), 0u);
  const std::vector<int> all = {0, 1, 2, 3, 4, 5, 5};
  const auto diag = confusion_matrix(all, all);
  EXPECT_EQ(diag.trace(), diag.total());

  const std::vector<int> bad = {6};
  EXPECT_THROW(confusion_matrix(bad, bad), InvalidArgument);
  const std::vector<int> shorter = {0};
  EXPECT_THROW(confusion_matrix(t, shorter), InvalidArgument);
}

TEST(Metrics, TwoByTwoHandComputed) {
  const ConfusionMatrix m{{3, 1}, {2, 2}};
  EXPECT_DOUBLE_EQ(balanced_accuracy(m), 0.625);
  EXPECT_DOUBLE_EQ(accuracy(m), 0.625);
  const auto prf = weighted_prf(m);
  EXPECT_NEAR(prf.recall, 0.625, 1e-12);
  // precision: 3/5 and 2/3; F1: 2/3 and 4/7; equal supports.
  EXPECT_NEAR(prf.precision, (0.6 + 2.0 / 3.0) / 2.0, 1e-12);
  EXPECT_NEAR(prf.precision, 0.63333, 1e-5);
  EXPECT_NEAR(prf.f1, (2.0 / 3.0 + 4.0 / 7.0) / 2.0, 1e-12);
  EXPECT_NEAR(prf.f1, 0.619048, 1e-6);
}

TEST(Metrics, DegenerateCases) {
  ConfusionMatrix diag;
  for (std::size_t c = 0; c < kNumClasses; ++c) diag.at(c, c) = c + 1;
  EXPECT_DOUBLE_EQ(balanced_accuracy(diag), 1.0);
  const auto prf = weighted_prf(diag);
  EXPECT_DOUBLE_EQ(prf.precision, 1.0);
  EXPECT_DOUBLE_EQ(prf.recall, 1.0);
  EXPECT_DOUBLE_EQ(prf.f1, 1.0);

  ConfusionMatrix collapsed;
  for (std::size_t c = 0; c < kNumClasses; ++c) collapsed.at(c, 2) = 10;
  EXPECT_NEAR(balanced_accuracy(collapsed), 1.0 / 6.0, 1e-12);
  // Never-predicted classes contribute precision 0.
  EXPECT_NEAR(weighted_prf(collapsed).precision, (1.0 / 6.0) * (1.0 / 6.0), 1e-12);

  ConfusionMatrix single;
  single.at(3, 3) = 4;
  const auto s = weighted_prf(single);
  EXPECT_DOUBLE_EQ(s.precision, 1.0);
  EXPECT_DOUBLE_EQ(s.f1, 1.0);
  EXPECT_DOUBLE_EQ(balanced_accuracy(single), 1.0);

  EXPECT_THROW(balanced_accuracy(ConfusionMatrix{}), InvalidArgument);
  EXPECT_THROW(weighted_prf(ConfusionMatrix{}), InvalidArgument);
}

TEST(Auc, Examples) {
  const std::vector<double> s = {0.1, 0.35, 0.4, 0.8};
  const std::vector<bool> pos = {false, false, true, true};
  EXPECT_DOUBLE_EQ(binary_auc(s, Flags({false, true, false, true})), 0.75);
  EXPECT_DOUBLE_EQ(binary_auc(s, Flags(pos)), 1.0);
  const std::vector<double> flat = {0.3, 0.3, 0.3, 0.3};
  EXPECT_DOUBLE_EQ(binary_auc(flat, Flags(pos)), 0.5);
}

TEST(Auc, MatchesPairCountingWithTies) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 6);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(30);
    std::vector<bool> pos(30);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = level(rng) / 6.0;
      pos[i] = coin(rng);
    }
    pos[0] = true;
    pos[1] = false;
    EXPECT_NEAR(binary_auc(s, Flags(pos)), pair_count_auc(s, pos), 1e-12);
    const auto roc = roc_curve(s, Flags(pos));
    ASSERT_TRUE(roc.auc);
    EXPECT_NEAR(*roc.auc, pair_count_auc(s, pos), 1e-12);
    EXPECT_EQ(roc.points.front(), std::make_pair(0.0, 0.0));
    EXPECT_EQ(roc.points.back(), std::make_pair(1.0, 1.0));
  }
}

TEST(Auc, MacroOneVsRest) {
  std::mt19937_64 rng(4);
  const auto rows = random_rows(80, rng);
  const auto labels = random_labels(80, rng);
  double expected = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<double> col;
    std::vector<bool> pos;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      col.push_back(rows[i][c]);
      pos.push_back(labels[i] == static_cast<int>(c));
    }
    expected += pair_count_auc(col, pos) / kNumClasses;
  }
  EXPECT_NEAR(auc_macro_ovr(rows, labels), expected, 1e-12);

  // Absent class is skipped with a warning.
  std::vector<int> no_five = labels;
  for (auto& l : no_five)
    if (l == 5) l = 4;
  const auto m = auc_ovr(rows, no_five);
  EXPECT_FALSE(m.per_class[5]);
  EXPECT_FALSE(m.warnings.empty());

  const std::vector<int> one_class(rows.size(), 2);
  EXPECT_THROW(auc_macro_ovr(rows, one_class), InvalidArgument);
}

TEST(Auc, InvariantUnderMonotoneColumnTransforms) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto rows = random_rows(50, rng);
    const auto labels = random_labels(50, rng);
    const double before = auc_macro_ovr(rows, labels);
    for (auto& r : rows)
      for (std::size_t c = 0; c < r.size(); ++c)
        r[c] = c % 2 ? std::exp(3.0 * r[c]) : std::log(r[c] + 0.01) * 2.0 + c;
    EXPECT_NEAR(auc_macro_ovr(rows, labels), before, 1e-12);
  }
}

TEST(Metrics, Identities) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> d(0, 5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> t(40), p(40);
    for (auto& v : t) v = d(rng);
    for (auto& v : p) v = d(rng);
    const auto m = confusion_matrix(t, p);
    EXPECT_NEAR(accuracy(m), weighted_prf(m).recall, 1e-12);
    for (double v : {accuracy(m), balanced_accuracy(m), weighted_prf(m).precision, weighted_prf(m).f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    // Duplicating every sample of one class keeps per-class recall.
    const int cls = d(rng);
    auto t2 = t, p2 = p;
    for (std::size_t i = 0; i < t.size(); ++i)
      if (t[i] == cls) {
        t2.push_back(t[i]);
        p2.push_back(p[i]);
      }
    EXPECT_NEAR(balanced_accuracy(confusion_matrix(t2, p2)), balanced_accuracy(m), 1e-12);
  }
}

TEST(Report, EvaluateAndSerialize) {
  std::mt19937_64 rng(7);
  const auto rows = random_rows(60, rng);
  const auto labels = random_labels(60, rng);
  const auto r = evaluate_predictions(rows, labels);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t n = 0;
    for (int l : labels) n += l == static_cast<int>(c);
    EXPECT_EQ(r.confusion.row_sum(c), n);
  }
  EXPECT_DOUBLE_EQ(r.acc, static_cast<double>(r.confusion.trace()) / r.confusion.total());
  ASSERT_EQ(r.roc.size(), kNumClasses);
  ASSERT_EQ(r.prob_dists.size(), kNumClasses);
  for (const auto& d : r.prob_dists) {
    if (d.empty()) continue;
    double s = 0.0;
    for (double v : d) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  const auto back = metrics_from_json(to_json(r));
  EXPECT_EQ(back.metric_values(), r.metric_values());
  EXPECT_EQ(back.confusion, r.confusion);
  EXPECT_EQ(to_json(back), to_json(r));
}

TEST(Aggregate, MeanAndSampleStd) {
  const std::vector<double> v = {0.7, 0.8};
  const auto s = summarize(v);
  EXPECT_NEAR(s.mean, 0.75, 1e-12);
  EXPECT_NEAR(s.std, std::sqrt(0.005), 1e-12);
  EXPECT_NEAR(s.std, 0.0707, 1e-4);
  EXPECT_EQ(format_summary(s), "0.750 ± 0.071");

  std::mt19937_64 rng(8);
  const auto rows = random_rows(40, rng);
  const auto labels = random_labels(40, rng);
  const auto rep = evaluate_predictions(rows, labels);
  const std::vector<MetricsReport> same(4, rep);
  const auto agg = aggregate_folds(same);
  EXPECT_EQ(agg.folds, 4u);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_NEAR(agg.metrics[k].mean, rep.metric_values()[k], 1e-12);
    EXPECT_NEAR(agg.metrics[k].std, 0.0, 1e-12);
  }
  EXPECT_THROW(aggregate_folds(std::span<const MetricsReport>(same.data(), 1)), InvalidArgument);
  std::vector<MetricsReport> mixed = {rep, rep};
  mixed[1].confusion = ConfusionMatrix(2);
  EXPECT_THROW(aggregate_folds(mixed), InvalidArgument);
}
