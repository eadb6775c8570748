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

#include "lesionfuse/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <fmt/format.h>

#include "lesionfuse/error.hpp"

namespace lesionfuse {

std::vector<double> ScoreMatrix::column(std::size_t t) const {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& row : values) out.push_back(row.at(t));
  return out;
}

void ScoreMatrix::validate() const {
  if (treatments.size() < 2) throw InvalidArgument("score matrix needs at least two treatments");
  if (values.size() < 2) throw InvalidArgument("score matrix needs at least two blocks");
  if (!blocks.empty() && blocks.size() != values.size())
    throw InvalidArgument("score matrix block labels do not match rows");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != treatments.size())
      throw InvalidArgument(fmt::format("score matrix row {} has {} cells, expected {}", i + 1,
                                        values[i].size(), treatments.size()));
    for (double v : values[i])
      if (!std::isfinite(v)) throw InvalidArgument(fmt::format("score matrix row {} has a missing cell", i + 1));
  }
}

ScoreMatrix ScoreMatrix::from_columns(std::vector<std::string> treatments,
                                      const std::vector<std::vector<double>>& columns) {
  if (treatments.size() != columns.size()) throw InvalidArgument("one column per treatment expected");
  ScoreMatrix m;
  m.treatments = std::move(treatments);
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns)
    if (c.size() != n) throw InvalidArgument("score columns differ in length");
  m.values.assign(n, std::vector<double>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) m.values[i][j] = columns[j][i];
  for (std::size_t i = 0; i < n; ++i) m.blocks.push_back(std::to_string(i + 1));
  return m;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

ScoreMatrix parse_score_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("score csv: empty input");
  auto header = split_csv(line);
  const bool labelled = !header.empty() && (header.front() == "block" || header.front() == "fold");
  ScoreMatrix m;
  m.treatments.assign(header.begin() + (labelled ? 1 : 0), header.end());
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
    auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw FormatError(fmt::format("score csv: row {} has {} cells, expected {}", row, cells.size(),
                                    header.size()));
    std::vector<double> values;
    for (std::size_t c = labelled ? 1 : 0; c < cells.size(); ++c) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cells[c], &used));
        if (used != cells[c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw FormatError(fmt::format("score csv: row {} column {}: '{}' is not a number", row, c + 1,
                                      cells[c]));
      }
    }
    m.blocks.push_back(labelled ? cells.front() : std::to_string(m.values.size() + 1));
    m.values.push_back(std::move(values));
  }
  m.validate();
  return m;
}

ScoreMatrix load_score_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(fmt::format("cannot open {}", file.string()));
  return parse_score_csv(in);
}

void write_score_csv(std::ostream& out, const ScoreMatrix& m) {
  out << "block";
  for (const auto& t : m.treatments) out << ',' << t;
  out << '\n';
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    out << (i < m.blocks.size() ? m.blocks[i] : std::to_string(i + 1));
    for (double v : m.values[i]) out << fmt::format(",{:.17g}", v);
    out << '\n';
  }
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = avg;
    i = j;
  }
  return ranks;
}

namespace {

// Sum of t^3 - t over tie groups.
double tie_term(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    sum += t * t * t - t;
    i = j;
  }
  return sum;
}

}  // namespace

double chi_square_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), x));
}

FriedmanResult friedman_test(const ScoreMatrix& m) {
  if (m.n_treatments() < 2) throw InvalidArgument("friedman: needs at least two treatments");
  m.validate();
  const double n = static_cast<double>(m.n_blocks());
  const double k = static_cast<double>(m.n_treatments());
  std::vector<double> rank_sum(m.n_treatments(), 0.0);
  double ties = 0.0;
  for (const auto& row : m.values) {
    const auto r = average_ranks(row);
    for (std::size_t j = 0; j < r.size(); ++j) rank_sum[j] += r[j];
    ties += tie_term(row);
  }
  FriedmanResult out;
  out.df = static_cast<int>(m.n_treatments()) - 1;
  double spread = 0.0;
  for (double s : rank_sum) {
    const double mean = s / n;
    out.mean_ranks.push_back(mean);
    spread += (mean - (k + 1.0) / 2.0) * (mean - (k + 1.0) / 2.0);
  }
  const double correction = 1.0 - ties / (n * k * (k * k - 1.0));
  if (correction <= 0.0 || spread == 0.0) {
    out.statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }
  out.statistic = 12.0 * n / (k * (k + 1.0)) * spread / correction;
  out.p_value = chi_square_sf(out.statistic, out.df);
  return out;
}

std::vector<double> wilcoxon_null_distribution(std::span<const double> ranks) {
  // Average ranks are multiples of 1/2, so doubled ranks are integers.
  std::vector<std::size_t> doubled;
  std::size_t total = 0;
  for (double r : ranks) {
    doubled.push_back(static_cast<std::size_t>(std::llround(2.0 * r)));
    total += doubled.back();
  }
  std::vector<double> ways(total + 1, 0.0);
  ways[0] = 1.0;
  std::size_t reach = 0;
  for (auto d : doubled) {
    reach += d;
    for (std::size_t s = reach; s >= d; --s) {
      ways[s] += ways[s - d];
      if (s == d) break;
    }
  }
  const double all = std::ldexp(1.0, static_cast<int>(doubled.size()));
  for (auto& w : ways) w /= all;
  return ways;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMethod method) {
  if (a.size() != b.size()) throw InvalidArgument("wilcoxon: samples differ in length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) diffs.push_back(a[i] - b[i]);
  if (diffs.empty()) throw InvalidArgument("wilcoxon: no information (all differences are zero)");

  std::vector<double> magnitude;
  for (double d : diffs) magnitude.push_back(std::abs(d));
  const auto ranks = average_ranks(magnitude);

  WilcoxonResult out;
  out.n = diffs.size();
  for (std::size_t i = 0; i < diffs.size(); ++i) (diffs[i] > 0 ? out.w_plus : out.w_minus) += ranks[i];
  out.statistic = std::min(out.w_plus, out.w_minus);

  out.exact = method == WilcoxonMethod::exact ||
              (method == WilcoxonMethod::automatic && out.n <= kWilcoxonExactLimit);
  if (out.exact) {
    if (out.n > 60) throw InvalidArgument("wilcoxon: exact method limited to 60 differences");
    const auto dist = wilcoxon_null_distribution(ranks);
    const auto limit = static_cast<std::size_t>(std::llround(2.0 * out.statistic));
    double tail = 0.0;
    for (std::size_t s = 0; s <= limit && s < dist.size(); ++s) tail += dist[s];
    out.p_value = std::min(1.0, 2.0 * tail);
    return out;
  }

  const double n = static_cast<double>(out.n);
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term(magnitude) / 48.0;
  if (var <= 0.0) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::abs(out.w_plus - mean) - 0.5) / std::sqrt(var);
  out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

std::vector<double> holm_adjust(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return p_values[x] < p_values[y]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const double v = std::min(1.0, static_cast<double>(m - r) * p_values[order[r]]);
    running = std::max(running, v);
    adjusted[order[r]] = running;
  }
  return adjusted;
}

const PairwiseResult* ComparisonReport::find_pair(const std::string& a, const std::string& b) const {
  if (!pairwise) return nullptr;
  for (const auto& p : *pairwise)
    if ((p.a == a && p.b == b) || (p.a == b && p.b == a)) return &p;
  return nullptr;
}

ComparisonReport compare_models(const ScoreMatrix& scores, const CompareOptions& options) {
  ComparisonReport report;
  report.treatments = scores.treatments;
  report.blocks = scores.n_blocks();
  report.options = options;
  report.friedman = friedman_test(scores);
  if (!(report.friedman.p_value < options.alpha_friedman)) return report;

  std::vector<PairwiseResult> pairs;
  std::vector<double> raw;
  for (std::size_t i = 0; i < scores.n_treatments(); ++i) {
    for (std::size_t j = i + 1; j < scores.n_treatments(); ++j) {
      PairwiseResult p;
      p.a = scores.treatments[i];
      p.b = scores.treatments[j];
      const auto ca = scores.column(i), cb = scores.column(j);
      const double ma = std::accumulate(ca.begin(), ca.end(), 0.0);
      const double mb = std::accumulate(cb.begin(), cb.end(), 0.0);
      p.better = ma >= mb ? p.a : p.b;
      try {
        p.test = wilcoxon_signed_rank(ca, cb, options.method);
        p.p_value = p.test->p_value;
      } catch (const InvalidArgument& e) {
        p.p_value = 1.0;
        p.note = e.what();
      }
      raw.push_back(p.p_value);
      pairs.push_back(std::move(p));
    }
  }
  if (options.holm) {
    const auto adjusted = holm_adjust(raw);
    for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].p_value = adjusted[i];
  }
  for (auto& p : pairs) p.significant = p.test.has_value() && p.p_value < options.alpha_wilcoxon;
  report.pairwise = std::move(pairs);
  return report;
}

nlohmann::json to_json(const ComparisonReport& r) {
  nlohmann::json j = {
      {"treatments", r.treatments},
      {"blocks", r.blocks},
      {"alpha_friedman", r.options.alpha_friedman},
      {"alpha_wilcoxon", r.options.alpha_wilcoxon},
      {"holm", r.options.holm},
      {"friedman",
       {{"statistic", r.friedman.statistic},
        {"p_value", r.friedman.p_value},
        {"df", r.friedman.df},
        {"mean_ranks", r.friedman.mean_ranks}}},
      {"significant", r.friedman.p_value < r.options.alpha_friedman}};
  if (r.pairwise) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : *r.pairwise) {
      nlohmann::json e = {{"a", p.a},
                          {"b", p.b},
                          {"p_value", p.p_value},
                          {"significant", p.significant},
                          {"better", p.better}};
      if (p.test) {
        e["statistic"] = p.test->statistic;
        e["w_plus"] = p.test->w_plus;
        e["w_minus"] = p.test->w_minus;
        e["n"] = p.test->n;
        e["exact"] = p.test->exact;
        e["p_value_raw"] = p.test->p_value;
      }
      if (!p.note.empty()) e["note"] = p.note;
      pairs.push_back(e);
    }
    j["pairwise"] = pairs;
  }
  return j;
}

}  // namespace lesionfuse
