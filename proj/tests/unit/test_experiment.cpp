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

#include <fstream>
#include <sstream>

#include "lesionfuse/error.hpp"
#include "lesionfuse/experiment.hpp"
#include "lesionfuse/report.hpp"
#include "lesionfuse/synthetic.hpp"
#include "test_util.hpp"

using namespace lesionfuse;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

class ExperimentTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new lftest::TempDir;
    SyntheticConfig sc;
    sc.size = 300;
    sc.seed = 21;
    sc.image_side = 16;
    generate_synthetic(sc, dir_->path() / "data");
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static ExperimentConfig quick(const std::string& out) {
    ExperimentConfig c;
    c.manifest = dir_->path() / "data" / "manifest.csv";
    c.output = dir_->path() / out;
    c.backbones = {BackboneName::tiny};
    c.scenarios = {Scenario::image_only, Scenario::fused};
    c.cf = {0.8};
    c.folds = 5;
    c.seed = 3;
    c.pretrained = false;
    c.image_side = 16;
    c.train.phase1_epochs = 2;
    c.train.phase2_epochs = 1;
    c.train.lr_phase1 = 1e-3;
    c.train.lr_phase2 = 1e-4;
    c.train.augment = AugmentPolicy::identity();
    return c;
  }

  static lftest::TempDir* dir_;
};

lftest::TempDir* ExperimentTest::dir_ = nullptr;

}  // namespace

TEST(ExperimentConfigTest, JsonRoundTripAndHash) {
  ExperimentConfig c;
  c.manifest = "/data/manifest.csv";
  c.backbones = {BackboneName::vgg13bn, BackboneName::tiny};
  c.cf = kSweepFactors;
  c.train.phase1_epochs = 7;
  c.color_constancy = ColorConstancyConfig{.p = std::numeric_limits<double>::infinity()};
  const auto back = experiment_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  auto moved = c;
  moved.output = "elsewhere";
  EXPECT_EQ(config_hash(moved), config_hash(c));
  moved.seed = 99;
  EXPECT_NE(config_hash(moved), config_hash(c));

  EXPECT_EQ(cf_label(0.8), "cf0.8");
  EXPECT_EQ((CellKey{BackboneName::resnet50, Scenario::fused, 0.8}.path()), "resnet50/fused/cf0.8");
  EXPECT_THROW(experiment_config_from_json({{"backbone", "nope"}}), Error);
  EXPECT_THROW(experiment_config_from_json({{"learning_rate", 1}}), FormatError);
}

TEST(ExperimentConfigTest, ReferenceDefaults) {
  const ExperimentConfig c;
  EXPECT_EQ(c.folds, 5u);
  EXPECT_EQ(c.image_side, 224);
  EXPECT_TRUE(c.pretrained);
  EXPECT_EQ(c.cf, std::vector<double>{0.8});
  ASSERT_TRUE(c.color_constancy);
  EXPECT_DOUBLE_EQ(c.color_constancy->p, 6.0);
  EXPECT_EQ(kSweepFactors, (std::vector<double>{0.5, 0.6, 0.7, 0.8, 0.9}));
}

TEST_F(ExperimentTest, InvalidFactorAbortsBeforeAnyWork) {
  auto c = quick("invalid");
  c.cf = {0.5, 1.0};
  EXPECT_THROW(run_experiment(c), InvalidArgument);
  EXPECT_FALSE(fs::exists(c.output));
  c.cf = {0.8};
  c.manifest = dir_->path() / "missing.csv";
  EXPECT_THROW(run_experiment(c), Error);
  EXPECT_FALSE(fs::exists(c.output));
}

TEST_F(ExperimentTest, BothScenariosTenCells) {
  const auto c = quick("both");
  const auto art = run_experiment(c, {.run_name = "r"});
  EXPECT_TRUE(art.synthetic);
  ASSERT_EQ(art.cells.size(), 2u);
  std::size_t trained = 0;
  for (const auto& cell : art.cells) {
    for (const auto& f : cell.folds) {
      EXPECT_TRUE(f.completed) << f.error;
      for (auto* name : {"history.csv", "predictions.csv", "checkpoint.lfc", "metrics.json"})
        EXPECT_TRUE(fs::exists(f.dir / name)) << f.dir / name;
      ++trained;
    }
    ASSERT_TRUE(cell.aggregate);
    EXPECT_EQ(cell.aggregate->folds, 5u);
  }
  EXPECT_EQ(trained, 10u);
  EXPECT_EQ(art.run_dir, c.output / "r");
  EXPECT_TRUE(fs::exists(art.run_dir / "config.json"));
  EXPECT_TRUE(fs::exists(art.run_dir / "tiny" / "fused" / "cf0.8" / "fold4" / "metrics.json"));

  const auto rows = csv_rows(slurp(art.run_dir / "report" / "metrics.csv"));
  ASSERT_EQ(rows.size(), 3u);  // header + two rows
  EXPECT_EQ(rows[0][6], "ACC_mean");
  EXPECT_EQ(rows[0][8], "BACC_mean");
  EXPECT_EQ(rows[1][5], "synthetic");
  const std::string md = slurp(art.run_dir / "report" / "metrics.md");
  EXPECT_NE(md.find("| ACC | BACC | P | R | F1 | AUC |"), std::string::npos);
  EXPECT_NE(md.find("Synthetic data"), std::string::npos);
  EXPECT_NE(md.find("test extractor"), std::string::npos);
  EXPECT_TRUE(fs::exists(art.run_dir / "report" / "comparison.json"));
  EXPECT_TRUE(fs::exists(art.run_dir / "report" / "plots" / "tiny_fused_cf0.8_roc.svg"));
  EXPECT_TRUE(fs::exists(art.run_dir / "report" / "plots" / "tiny_image_only_cf0.8_confusion.svg"));

  // Every table number is recomputable from the fold metrics files.
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto scenario = parse_scenario(rows[r][1]);
    std::vector<MetricsReport> reports;
    for (std::size_t f = 0; f < 5; ++f) {
      std::ifstream in(art.run_dir / "tiny" / rows[r][1] / "cf0.8" / ("fold" + std::to_string(f)) / "metrics.json");
      reports.push_back(metrics_from_json(nlohmann::json::parse(in)));
    }
    const auto agg = aggregate_folds(reports);
    for (std::size_t m = 0; m < 6; ++m) {
      EXPECT_DOUBLE_EQ(std::stod(rows[r][6 + 2 * m]), agg.metrics[m].mean);
      EXPECT_DOUBLE_EQ(std::stod(rows[r][7 + 2 * m]), agg.metrics[m].std);
    }
    EXPECT_NE(art.find(BackboneName::tiny, scenario, 0.8), nullptr);
  }

  // Reloaded artifacts reproduce the reports byte for byte.
  const auto before_md = slurp(art.run_dir / "report" / "metrics.md");
  const auto before_cmp = slurp(art.run_dir / "report" / "comparison.json");
  const auto loaded = load_artifacts(art.run_dir);
  EXPECT_EQ(loaded.cells.size(), 2u);
  EXPECT_EQ(loaded.folds.fold_of, art.folds.fold_of);
  emit_reports(loaded);
  EXPECT_EQ(slurp(art.run_dir / "report" / "metrics.md"), before_md);
  EXPECT_EQ(slurp(art.run_dir / "report" / "comparison.json"), before_cmp);
  emit_reports(loaded);
  EXPECT_EQ(slurp(art.run_dir / "report" / "metrics.md"), before_md);

  // A checkpoint re-evaluates to its stored metrics.
  const auto fold = art.run_dir / "tiny" / "fused" / "cf0.8" / "fold2";
  const auto again = evaluate_checkpoint(fold / "checkpoint.lfc", c.manifest);
  std::ifstream in(fold / "metrics.json");
  const auto stored = metrics_from_json(nlohmann::json::parse(in));
  for (std::size_t m = 0; m < 6; ++m) EXPECT_NEAR(again.metric_values()[m], stored.metric_values()[m], 1e-12);
  EXPECT_EQ(again.confusion, stored.confusion);
}

TEST_F(ExperimentTest, RerunGivesIdenticalFoldsAndReports) {
  auto c = quick("rerun");
  c.scenarios = {Scenario::fused};
  c.only_folds = {0, 1};
  const auto a = run_experiment(c, {.run_name = "a"});
  const auto b = run_experiment(c, {.run_name = "b"});
  EXPECT_EQ(slurp(a.run_dir / "folds.csv"), slurp(b.run_dir / "folds.csv"));
  EXPECT_EQ(slurp(a.run_dir / "report" / "metrics.csv"), slurp(b.run_dir / "report" / "metrics.csv"));
  EXPECT_EQ(slurp(a.run_dir / "tiny/fused/cf0.8/fold1/history.csv"),
            slurp(b.run_dir / "tiny/fused/cf0.8/fold1/history.csv"));
}

TEST_F(ExperimentTest, SweepTableHasFiveRows) {
  auto c = quick("sweep");
  c.scenarios = {Scenario::fused};
  c.cf = kSweepFactors;
  c.only_folds = {0, 1};
  c.train.phase1_epochs = 1;
  c.train.phase2_epochs = 0;
  const auto art = run_experiment(c, {.run_name = "s"});
  const auto rows = csv_rows(slurp(art.run_dir / "report" / "metrics.csv"));
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(std::stod(rows[i + 1][2]), kSweepFactors[i]);
  const auto scores = fold_score_matrix(std::span(&art, 1));
  EXPECT_EQ(scores.n_treatments(), 5u);
  EXPECT_EQ(scores.n_blocks(), 2u);
}

TEST(ExperimentFailures, FoldFailureIsRecordedAndRunContinues) {
  lftest::TempDir dir;
  SyntheticConfig sc;
  sc.size = 60;
  sc.seed = 4;
  sc.image_side = 16;
  // A single MEL sample: folds whose training slice misses it must fail.
  sc.proportions = {19.0 / 60, 10.0 / 60, 1.0 / 60, 10.0 / 60, 10.0 / 60, 10.0 / 60};
  generate_synthetic(sc, dir / "data");
  ExperimentConfig c;
  c.manifest = dir / "data" / "manifest.csv";
  c.output = dir / "runs";
  c.backbones = {BackboneName::tiny};
  c.scenarios = {Scenario::fused};
  c.folds = 5;
  c.pretrained = false;
  c.image_side = 16;
  c.train.phase1_epochs = 1;
  c.train.phase2_epochs = 0;
  c.train.augment = AugmentPolicy::identity();
  const auto art = run_experiment(c, {.run_name = "f"});
  ASSERT_EQ(art.cells.size(), 1u);
  std::size_t failed = 0, completed = 0;
  for (const auto& f : art.cells[0].folds) {
    if (f.completed) {
      ++completed;
    } else {
      ++failed;
      EXPECT_NE(f.error.find("no samples of class mel"), std::string::npos);
      EXPECT_TRUE(fs::exists(f.dir / "error.txt"));
    }
  }
  EXPECT_EQ(failed, 2u);
  EXPECT_EQ(completed, 3u);
  ASSERT_TRUE(art.cells[0].aggregate);
  EXPECT_EQ(art.cells[0].aggregate->folds, 3u);
  const std::string md = slurp(art.run_dir / "report" / "metrics.md");
  EXPECT_NE(md.find("3/5"), std::string::npos);
  EXPECT_NE(md.find("no samples of class mel"), std::string::npos);
}

TEST(Preprocess, DatasetIsRewritten) {
  lftest::TempDir dir;
  SyntheticConfig sc;
  sc.size = 12;
  sc.image_side = 16;
  const auto d = generate_synthetic(sc, dir / "in");
  const auto out = preprocess_dataset(d.manifest, dir / "out", ColorConstancyConfig{}, 8);
  EXPECT_EQ(out.size(), 12u);
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.csv"));
  const auto img = read_image(out.image_file(out.records[3]));
  EXPECT_EQ(img.width, 8);
}
