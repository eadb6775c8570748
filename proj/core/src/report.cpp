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

#include "lesionfuse/report.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "lesionfuse/error.hpp"

namespace lesionfuse {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 6> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                                  "#d62728", "#9467bd", "#8c564b"};

constexpr const char* kSyntheticNote =
    "Synthetic data: every number below comes from generated images and clinical "
    "records, not from patients.";

std::string class_name(std::size_t c, std::size_t classes) {
  if (classes == kNumClasses) return std::string(display_name(static_cast<Diagnosis>(c)));
  return std::to_string(c);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string svg_open(int w, int h) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      w, h);
}

std::size_t completed_count(const CellResult& cell) { return cell.completed_reports().size(); }

std::string cell_file_stem(const CellKey& key) {
  return fmt::format("{}_{}_{}", to_string(key.backbone), to_string(key.scenario), cf_label(key.cf));
}

}  // namespace

std::string metrics_table_markdown(const RunArtifacts& art) {
  std::string out = "# Metrics\n\n";
  if (art.synthetic) out += fmt::format("> {}\n\n", kSyntheticNote);
  for (const auto& cell : art.cells)
    if (is_test_backbone(cell.key.backbone)) {
      out += "> `tiny` is a small test extractor; its rows are not comparable with ImageNet backbones.\n\n";
      break;
    }
  out += "Mean ± sample standard deviation over completed test folds.\n\n";
  out += "| Model | Scenario | c_f | Folds |";
  for (auto* m : kMetricNames) out += fmt::format(" {} |", m);
  out += "\n|---|---|---|---|";
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) out += "---|";
  out += '\n';
  std::vector<std::string> failures;
  for (const auto& cell : art.cells) {
    const auto reports = cell.completed_reports();
    out += fmt::format("| {} | {} | {:g} | {}/{} |", to_string(cell.key.backbone), to_string(cell.key.scenario),
                       cell.key.cf, reports.size(), cell.folds.size());
    for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
      if (cell.aggregate)
        out += fmt::format(" {} |", format_summary(cell.aggregate->metrics[m]));
      else if (reports.size() == 1)
        out += fmt::format(" {:.3f} |", reports.front().metric_values()[m]);
      else
        out += " failed |";
    }
    out += '\n';
    for (const auto& f : cell.folds)
      if (!f.completed) failures.push_back(fmt::format("- {} fold {}: {}", cell.key.label(), f.fold, f.error));
  }
  if (!failures.empty()) {
    out += "\nFailed folds:\n\n";
    for (const auto& f : failures) out += f + '\n';
  }
  return out;
}

std::string metrics_table_csv(const RunArtifacts& art) {
  std::string out = "model,scenario,cf,folds_completed,folds_configured,data";
  for (auto* m : kMetricNames) out += fmt::format(",{0}_mean,{0}_std", m);
  out += '\n';
  for (const auto& cell : art.cells) {
    const auto reports = cell.completed_reports();
    out += fmt::format("{},{},{:g},{},{},{}", to_string(cell.key.backbone), to_string(cell.key.scenario),
                       cell.key.cf, reports.size(), cell.folds.size(), art.synthetic ? "synthetic" : "real");
    for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
      if (cell.aggregate)
        out += fmt::format(",{:.17g},{:.17g}", cell.aggregate->metrics[m].mean, cell.aggregate->metrics[m].std);
      else if (reports.size() == 1)
        out += fmt::format(",{:.17g},", reports.front().metric_values()[m]);
      else
        out += ",,";
    }
    out += '\n';
  }
  return out;
}

ScoreMatrix fold_score_matrix(std::span<const RunArtifacts> runs, std::size_t metric) {
  if (runs.empty()) throw InvalidArgument("score matrix: no runs");
  if (metric >= kMetricNames.size()) throw InvalidArgument("score matrix: unknown metric");
  ScoreMatrix m;
  for (const auto& cell : runs.front().cells) m.treatments.push_back(cell.key.label());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    if (run.cells.size() != m.treatments.size())
      throw InvalidArgument("score matrix: runs configure different cells");
    std::set<std::size_t> folds;
    for (const auto& f : run.cells.front().folds) folds.insert(f.fold);
    for (std::size_t fold : folds) {
      std::vector<double> row;
      for (std::size_t c = 0; c < run.cells.size(); ++c) {
        if (run.cells[c].key.label() != m.treatments[c])
          throw InvalidArgument("score matrix: runs configure different cells");
        for (const auto& f : run.cells[c].folds)
          if (f.fold == fold && f.completed && f.metrics) row.push_back(f.metrics->metric_values()[metric]);
      }
      if (row.size() != run.cells.size()) continue;  // a cell failed on this fold
      m.blocks.push_back(runs.size() == 1 ? fmt::format("fold{}", fold)
                                          : fmt::format("run{}-fold{}", r, fold));
      m.values.push_back(std::move(row));
    }
  }
  return m;
}

std::string confusion_svg(const ConfusionMatrix& m, const std::string& title) {
  const int n = static_cast<int>(m.classes());
  const int cell = 56, left = 70, top = 50;
  const int w = left + n * cell + 20, h = top + n * cell + 50;
  std::string s = svg_open(w, h);
  s += fmt::format("<text x=\"{}\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n", w / 2,
                   escape(title));
  for (int i = 0; i < n; ++i) {
    const double row = static_cast<double>(m.row_sum(static_cast<std::size_t>(i)));
    for (int j = 0; j < n; ++j) {
      const auto count = m.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      const double frac = row > 0 ? static_cast<double>(count) / row : 0.0;
      const int shade = static_cast<int>(255.0 - 200.0 * frac);
      s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"rgb({},{},255)\" stroke=\"#999\"/>\n",
                       left + j * cell, top + i * cell, cell, cell, shade, shade);
      s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{}\">{}</text>\n",
                       left + j * cell + cell / 2, top + i * cell + cell / 2 + 4,
                       frac > 0.6 ? "white" : "black", count);
    }
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 6,
                     top + i * cell + cell / 2 + 4, class_name(static_cast<std::size_t>(i), m.classes()));
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + i * cell + cell / 2,
                     top - 6, class_name(static_cast<std::size_t>(i), m.classes()));
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">predicted</text>\n", left + n * cell / 2,
                   top + n * cell + 24);
  s += fmt::format("<text x=\"14\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {0})\">true</text>\n",
                   top + n * cell / 2);
  return s + "</svg>\n";
}

std::string roc_svg(const std::vector<MetricsReport>& folds, const std::string& title) {
  if (folds.empty()) throw InvalidArgument("roc plot: no fold reports");
  const std::size_t classes = folds.front().roc.size();
  const int panel = 200, pad = 40, cols = 3;
  const int rows = static_cast<int>((classes + cols - 1) / cols);
  const int w = cols * (panel + pad) + pad, h = rows * (panel + pad + 20) + 50;
  std::string s = svg_open(w, h);
  s += fmt::format("<text x=\"{}\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n", w / 2,
                   escape(title));
  for (std::size_t c = 0; c < classes; ++c) {
    const int x0 = pad + static_cast<int>(c % cols) * (panel + pad);
    const int y0 = 50 + static_cast<int>(c / cols) * (panel + pad + 20);
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", x0,
                     y0, panel, panel);
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n",
                     x0, y0 + panel, x0 + panel, y0);
    double auc_sum = 0.0;
    int auc_n = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto& curve = folds[f].roc.at(c);
      if (curve.auc) {
        auc_sum += *curve.auc;
        ++auc_n;
      }
      if (curve.points.empty()) continue;
      std::string pts;
      for (const auto& [fpr, tpr] : curve.points)
        pts += fmt::format("{:.2f},{:.2f} ", x0 + fpr * panel, y0 + (1.0 - tpr) * panel);
      s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"/>\n", pts,
                       kPalette[f % kPalette.size()]);
    }
    const std::string auc = auc_n ? fmt::format("AUC {:.3f}", auc_sum / auc_n) : "absent";
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{} ({})</text>\n", x0 + panel / 2, y0 - 6,
                     class_name(c, classes), auc);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"9\">FPR</text>\n",
                     x0 + panel / 2, y0 + panel + 12);
  }
  return s + "</svg>\n";
}

std::string probability_svg(const std::vector<MetricsReport>& folds, const std::string& title) {
  if (folds.empty()) throw InvalidArgument("probability plot: no fold reports");
  const std::size_t classes = folds.front().prob_dists.size();
  std::vector<std::vector<double>> mean(classes, std::vector<double>(classes, 0.0));
  std::vector<int> seen(classes, 0);
  for (const auto& r : folds)
    for (std::size_t t = 0; t < classes; ++t) {
      if (r.prob_dists.at(t).empty()) continue;
      ++seen[t];
      for (std::size_t k = 0; k < classes; ++k) mean[t][k] += r.prob_dists[t][k];
    }
  const int group = 16 * static_cast<int>(classes) + 20, chart = 200, left = 40, top = 40;
  const int w = left + group * static_cast<int>(classes) + 120, h = top + chart + 50;
  std::string s = svg_open(w, h);
  s += fmt::format("<text x=\"{}\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n", w / 2,
                   escape(title));
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", left, top,
                   top + chart);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", left, top + chart,
                   left + group * static_cast<int>(classes));
  for (int tick = 0; tick <= 4; ++tick)
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"9\">{:.2f}</text>\n", left - 4,
                     top + chart - tick * chart / 4 + 3, tick / 4.0);
  for (std::size_t t = 0; t < classes; ++t) {
    const int gx = left + static_cast<int>(t) * group + 10;
    for (std::size_t k = 0; k < classes && seen[t] > 0; ++k) {
      const double p = mean[t][k] / seen[t];
      const int bh = static_cast<int>(p * chart + 0.5);
      s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"{}\" fill=\"{}\"/>\n",
                       gx + static_cast<int>(k) * 16, top + chart - bh, bh, kPalette[k % kPalette.size()]);
    }
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", gx + group / 2 - 10,
                     top + chart + 16, class_name(t, classes));
  }
  for (std::size_t k = 0; k < classes; ++k) {
    const int ly = top + static_cast<int>(k) * 16;
    const int lx = left + group * static_cast<int>(classes) + 20;
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", lx, ly,
                     kPalette[k % kPalette.size()]);
    s += fmt::format("<text x=\"{}\" y=\"{}\">p({})</text>\n", lx + 14, ly + 9, class_name(k, classes));
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">true class</text>\n",
                   left + group * static_cast<int>(classes) / 2, top + chart + 36);
  return s + "</svg>\n";
}

std::vector<fs::path> emit_reports(const RunArtifacts& art, const ReportOptions& options) {
  const bool any = std::any_of(art.cells.begin(), art.cells.end(),
                               [](const auto& c) { return completed_count(c) > 0; });
  if (!any) throw InvalidArgument("report: no completed cell");
  const fs::path dir = art.run_dir / "report";
  std::vector<fs::path> written;
  auto put = [&](const fs::path& file, const std::string& text) {
    write_text_atomic(file, text);
    written.push_back(file);
  };
  put(dir / "metrics.md", metrics_table_markdown(art));
  put(dir / "metrics.csv", metrics_table_csv(art));

  for (const auto& cell : art.cells) {
    const auto reports = cell.completed_reports();
    if (reports.empty()) continue;
    ConfusionMatrix total(reports.front().confusion.classes());
    for (const auto& r : reports)
      for (std::size_t i = 0; i < total.classes(); ++i)
        for (std::size_t j = 0; j < total.classes(); ++j) total.at(i, j) += r.confusion.at(i, j);
    const std::string stem = cell_file_stem(cell.key);
    const std::string suffix = art.synthetic ? " [synthetic data]" : "";
    put(dir / "plots" / (stem + "_confusion.svg"),
        confusion_svg(total, fmt::format("{}: confusion, all test folds{}", cell.key.label(), suffix)));
    put(dir / "plots" / (stem + "_roc.svg"),
        roc_svg(reports, fmt::format("{}: ROC per class, one curve per fold{}", cell.key.label(), suffix)));
    put(dir / "plots" / (stem + "_probabilities.svg"),
        probability_svg(reports, fmt::format("{}: mean predicted probabilities{}", cell.key.label(), suffix)));
  }

  if (art.cells.size() >= 2) {
    const RunArtifacts* runs = &art;
    const ScoreMatrix scores = fold_score_matrix(std::span<const RunArtifacts>(runs, 1), options.metric);
    std::ostringstream csv;
    write_score_csv(csv, scores);
    put(dir / "fold_scores.csv", csv.str());
    nlohmann::json j;
    j["metric"] = kMetricNames[options.metric];
    j["synthetic"] = art.synthetic;
    try {
      j["comparison"] = to_json(compare_models(scores, options.compare));
    } catch (const InvalidArgument& e) {
      j["comparison"] = nullptr;
      j["error"] = e.what();
    }
    put(dir / "comparison.json", j.dump(2) + "\n");
  }
  return written;
}

}  // namespace lesionfuse
