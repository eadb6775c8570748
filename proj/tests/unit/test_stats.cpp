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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "lesionfuse/error.hpp"
#include "lesionfuse/stats.hpp"

using namespace lesionfuse;

namespace {

// Oracle: enumerate all 2^n sign assignments of the absolute ranks.
double enumerated_wilcoxon_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  std::vector<double> abs_d;
  for (double v : d) abs_d.push_back(std::abs(v));
  const auto ranks = average_ranks(abs_d);
  double w_plus = 0.0, total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    total += ranks[i];
    if (d[i] > 0) w_plus += ranks[i];
  }
  const double w = std::min(w_plus, total - w_plus);
  const std::size_t n = d.size();
  std::size_t hits = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += ranks[i];
    if (s <= w + 1e-9) ++hits;
  }
  return std::min(1.0, 2.0 * hits / static_cast<double>(std::size_t{1} << n));
}

ScoreMatrix matrix(std::vector<std::vector<double>> rows) {
  ScoreMatrix m;
  m.values = std::move(rows);
  for (std::size_t j = 0; j < m.values.front().size(); ++j) m.treatments.push_back("t" + std::to_string(j));
  for (std::size_t i = 0; i < m.values.size(); ++i) m.blocks.push_back("b" + std::to_string(i));
  return m;
}

}  // namespace

TEST(Ranks, AverageTies) {
  const std::vector<double> v = {3.0, 1.0, 3.0, 2.0, 3.0};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{4.0, 1.0, 4.0, 2.0, 4.0}));
}

TEST(Friedman, AllTiedGivesZero) {
  const auto r = friedman_test(matrix({{1, 1, 1}, {2, 2, 2}, {0.5, 0.5, 0.5}}));
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
}

TEST(Friedman, ConsistentOrderingThreeByThree) {
  const auto m = matrix({{0.1, 0.2, 0.3}, {0.5, 0.6, 0.7}, {0.2, 0.25, 0.9}});
  const auto r = friedman_test(m);
  EXPECT_NEAR(r.statistic, 6.0, 1e-12);
  EXPECT_EQ(r.df, 2);
  EXPECT_NEAR(r.p_value, std::exp(-3.0), 1e-12);
  EXPECT_NEAR(r.p_value, 0.0498, 1e-4);
  EXPECT_EQ(r.mean_ranks, (std::vector<double>{1.0, 2.0, 3.0}));

  // Enumerate every within-block ordering: 6^3 = 216 rank tables. A shared
  // ordering is the most extreme outcome.
  std::vector<std::vector<int>> perms;
  std::vector<int> p = {1, 2, 3};
  do perms.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  double max_stat = 0.0;
  int at_least_six = 0, count = 0;
  for (auto& a : perms)
    for (auto& b : perms)
      for (auto& c : perms) {
        auto mm = matrix({{double(a[0]), double(a[1]), double(a[2])},
                          {double(b[0]), double(b[1]), double(b[2])},
                          {double(c[0]), double(c[1]), double(c[2])}});
        const double s = friedman_test(mm).statistic;
        // Oracle: the closed form from rank sums.
        double sum = 0.0;
        for (int j = 0; j < 3; ++j) {
          const double rbar = (a[j] + b[j] + c[j]) / 3.0;
          sum += (rbar - 2.0) * (rbar - 2.0);
        }
        EXPECT_NEAR(s, 12.0 * 3 / (3 * 4) * sum, 1e-9);
        max_stat = std::max(max_stat, s);
        at_least_six += s >= 6.0 - 1e-9;
        ++count;
      }
  EXPECT_EQ(count, 216);
  EXPECT_NEAR(max_stat, 6.0, 1e-12);
  EXPECT_EQ(at_least_six, 6);
}

TEST(Friedman, TwoTreatmentsReduceToSignStatistic) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> rows;
    int wins = 0;
    for (int i = 0; i < 10; ++i) {
      const double x = d(rng), y = d(rng);
      rows.push_back({x, y});
      wins += y > x;
    }
    const auto r = friedman_test(matrix(rows));
    const double expected = (2.0 * wins - 10) * (2.0 * wins - 10) / 10.0;
    EXPECT_NEAR(r.statistic, expected, 1e-9);
    // Normal approximation to the binomial sign test, two-sided.
    const double z = std::abs(2.0 * wins - 10) / std::sqrt(10.0);
    EXPECT_NEAR(r.p_value, std::erfc(z / std::sqrt(2.0)), 1e-9);
  }
}

TEST(Friedman, InvariantUnderWithinBlockMonotoneMaps) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> rows(6, std::vector<double>(4));
    for (auto& r : rows)
      for (auto& v : r) v = std::round(u(rng) * 5) / 5;  // coarse grid forces ties
    const auto base = friedman_test(matrix(rows));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (auto& v : rows[i]) v = std::exp(v * (i + 1)) - 7.0 * i;
    const auto mapped = friedman_test(matrix(rows));
    EXPECT_NEAR(mapped.statistic, base.statistic, 1e-9);
    EXPECT_NEAR(mapped.p_value, base.p_value, 1e-12);
  }
}

TEST(Friedman, ShapeErrors) {
  EXPECT_THROW(friedman_test(matrix({{1.0}, {2.0}})), InvalidArgument);
  EXPECT_THROW(friedman_test(matrix({{1.0, 2.0}})), InvalidArgument);
  auto ragged = matrix({{1.0, 2.0}, {1.0, 2.0}});
  ragged.values[1].pop_back();
  EXPECT_THROW(friedman_test(ragged), InvalidArgument);
}

TEST(Wilcoxon, SmallExample) {
  const std::vector<double> a = {1, 2, 3}, b = {0, 0, 0};
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_DOUBLE_EQ(r.w_minus, 0.0);
  EXPECT_DOUBLE_EQ(r.w_plus, 6.0);
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 0.25);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.n, 3u);
}

TEST(Wilcoxon, NoInformation) {
  const std::vector<double> a = {1, 2, 3};
  try {
    wilcoxon_signed_rank(a, a);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("no information"), std::string::npos);
  }
}

TEST(Wilcoxon, ExactMatchesEnumerationAndIsAntisymmetric) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> d(-4, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + trial % 10;
    std::vector<double> a(n), b(n, 0.0);
    for (auto& v : a) v = d(rng);  // integer differences give ties and zeros
    if (std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; })) a[0] = 1.0;
    const auto r = wilcoxon_signed_rank(a, b, WilcoxonMethod::exact);
    EXPECT_NEAR(r.p_value, enumerated_wilcoxon_p(a, b), 1e-12);
    const auto s = wilcoxon_signed_rank(b, a, WilcoxonMethod::exact);
    EXPECT_NEAR(s.p_value, r.p_value, 1e-12);
    EXPECT_DOUBLE_EQ(s.w_plus, r.w_minus);
    EXPECT_DOUBLE_EQ(s.w_minus, r.w_plus);
  }
}

TEST(Wilcoxon, NullDistributionSumsToOne) {
  for (std::size_t n : {1u, 5u, 12u, 20u}) {
    std::vector<double> ranks(n);
    std::iota(ranks.begin(), ranks.end(), 1.0);
    const auto pmf = wilcoxon_null_distribution(ranks);
    EXPECT_NEAR(std::accumulate(pmf.begin(), pmf.end(), 0.0), 1.0, 1e-12);
  }
  const std::vector<double> tied = {1.5, 1.5, 3.0, 5.0, 5.0, 5.0};
  const auto pmf = wilcoxon_null_distribution(tied);
  EXPECT_NEAR(std::accumulate(pmf.begin(), pmf.end(), 0.0), 1.0, 1e-12);
}

TEST(Wilcoxon, ExactAndApproximateAgreeAtTwenty) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(20), b(20);
    const double shift = 0.1 * (trial % 8);
    for (std::size_t i = 0; i < 20; ++i) {
      a[i] = d(rng) + shift;
      b[i] = d(rng);
    }
    const auto e = wilcoxon_signed_rank(a, b, WilcoxonMethod::exact);
    const auto n = wilcoxon_signed_rank(a, b, WilcoxonMethod::approximate);
    EXPECT_FALSE(n.exact);
    EXPECT_NEAR(e.p_value, n.p_value, 0.02);
  }
  // Automatic switches to the normal branch past the limit.
  std::vector<double> a(25), b(25, 0.0);
  std::iota(a.begin(), a.end(), 1.0);
  EXPECT_FALSE(wilcoxon_signed_rank(a, b).exact);
}

TEST(Holm, StepDown) {
  const std::vector<double> p = {0.01, 0.04, 0.03, 0.005};
  const auto adj = holm_adjust(p);
  const std::vector<double> expected = {0.03, 0.06, 0.06, 0.02};
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(adj[i], expected[i], 1e-12);
  const std::vector<double> big = {0.5, 0.6};
  EXPECT_EQ(holm_adjust(big), (std::vector<double>{1.0, 1.0}));
}

TEST(Compare, IdenticalModelsSkipPairwise) {
  const auto m = matrix({{0.7, 0.7}, {0.8, 0.8}, {0.6, 0.6}, {0.75, 0.75}, {0.65, 0.65}});
  const auto r = compare_models(m);
  EXPECT_DOUBLE_EQ(r.friedman.p_value, 1.0);
  EXPECT_FALSE(r.pairwise);
  EXPECT_FALSE(to_json(r).contains("pairwise"));
}

TEST(Compare, DominantColumnWins) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<std::vector<double>> rows;
  for (int b = 0; b < 10; ++b) {
    std::vector<double> row;
    for (int t = 0; t < 5; ++t) row.push_back((t == 3 ? 0.9 : 0.6) + noise(rng));
    rows.push_back(row);
  }
  const auto r = compare_models(matrix(rows));
  EXPECT_LT(r.friedman.p_value, 0.05);
  ASSERT_TRUE(r.pairwise);
  EXPECT_EQ(r.pairwise->size(), 10u);
  for (int t = 0; t < 5; ++t) {
    if (t == 3) continue;
    const auto* p = r.find_pair("t3", "t" + std::to_string(t));
    ASSERT_NE(p, nullptr);
    EXPECT_TRUE(p->significant);
    EXPECT_EQ(p->better, "t3");
    // All ten differences positive: two-sided p = 2 / 2^10.
    EXPECT_NEAR(p->p_value, 2.0 / 1024.0, 1e-12);
  }
}

TEST(Compare, FiveByFiveProtocolShape) {
  std::vector<std::vector<double>> rows;
  for (int b = 0; b < 5; ++b) rows.push_back({0.60 + 0.01 * b, 0.62, 0.70, 0.80 + 0.001 * b, 0.75});
  const auto r = compare_models(matrix(rows), {.alpha_friedman = 0.05, .alpha_wilcoxon = 0.01});
  EXPECT_LT(r.friedman.p_value, 0.05);
  ASSERT_TRUE(r.pairwise);
  // With five blocks the smallest attainable exact two-sided p is 2/32.
  for (const auto& p : *r.pairwise) {
    EXPECT_GE(p.p_value, 2.0 / 32.0 - 1e-12);
    EXPECT_FALSE(p.significant);
  }
  const auto holm = compare_models(matrix(rows), {.holm = true});
  for (std::size_t i = 0; i < holm.pairwise->size(); ++i)
    EXPECT_GE((*holm.pairwise)[i].p_value, (*r.pairwise)[i].p_value);
}

TEST(Compare, PairWithoutInformationIsRecorded) {
  std::vector<std::vector<double>> rows;
  for (int b = 0; b < 8; ++b) rows.push_back({0.5, 0.5, 0.9 + 0.001 * b});
  const auto r = compare_models(matrix(rows));
  ASSERT_TRUE(r.pairwise);
  const auto* p = r.find_pair("t0", "t1");
  ASSERT_NE(p, nullptr);
  EXPECT_FALSE(p->test);
  EXPECT_DOUBLE_EQ(p->p_value, 1.0);
  EXPECT_FALSE(p->note.empty());
}

TEST(ScoreCsv, RoundTripAndErrors) {
  std::istringstream in("fold,a,b\nfold0,0.5,0.6\nfold1,0.55,0.65\n");
  const auto m = parse_score_csv(in);
  EXPECT_EQ(m.treatments, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(m.blocks, (std::vector<std::string>{"fold0", "fold1"}));
  EXPECT_DOUBLE_EQ(m.values[1][1], 0.65);
  std::ostringstream out;
  write_score_csv(out, m);
  std::istringstream again(out.str());
  const auto m2 = parse_score_csv(again);
  EXPECT_EQ(m2.values, m.values);
  EXPECT_EQ(m2.blocks, m.blocks);

  std::istringstream plain("x,y,z\n1,2,3\n4,5,6\n");
  EXPECT_EQ(parse_score_csv(plain).n_treatments(), 3u);
  std::istringstream bad("a,b\n1,oops\n2,3\n");
  EXPECT_THROW(parse_score_csv(bad), FormatError);
  std::istringstream ragged("a,b\n1\n2,3\n");
  EXPECT_THROW(parse_score_csv(ragged), FormatError);
}
