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

// lesionfuse command-line interface.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lesionfuse/data_model.hpp"
#include "lesionfuse/error.hpp"
#include "lesionfuse/evaluation.hpp"
#include "lesionfuse/experiment.hpp"
#include "lesionfuse/report.hpp"
#include "lesionfuse/stats.hpp"
#include "lesionfuse/synthetic.hpp"

namespace lf = lesionfuse;
namespace fs = std::filesystem;

namespace {

// Flags shared by train and sweep; each overrides the config file.
struct CellFlags {
  std::string config;
  std::string manifest;
  std::vector<std::string> backbones;
  std::vector<std::string> scenarios;
  std::vector<double> cf;
  std::optional<std::size_t> folds;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::size_t> only_folds;
  std::optional<int> phase1_epochs;
  std::optional<int> phase2_epochs;
  bool no_augment = false;
  bool no_pretrained = false;
  std::optional<int> image_side;
  std::string run_name;
};

void add_cell_flags(CLI::App* cmd, CellFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--manifest", f.manifest, "Dataset manifest CSV")->check(CLI::ExistingFile);
  cmd->add_option("--backbone", f.backbones, "Backbone name(s)");
  cmd->add_option("--scenario", f.scenarios, "image_only | fused");
  cmd->add_option("--cf", f.cf, "Combination factor(s) in [0, 1)");
  cmd->add_option("--folds", f.folds, "Number of cross-validation folds");
  cmd->add_option("--seed", f.seed, "Seed for folds, initialization and shuffling");
  cmd->add_option("--out", f.out, "Output directory for runs");
  cmd->add_option("--fold", f.only_folds, "Train only these test folds");
  cmd->add_option("--phase1-epochs", f.phase1_epochs, "Override phase-1 epoch budget");
  cmd->add_option("--phase2-epochs", f.phase2_epochs, "Override phase-2 epoch budget");
  cmd->add_option("--image-side", f.image_side, "Network input side in pixels");
  cmd->add_flag("--no-augment", f.no_augment, "Disable training-time augmentation");
  cmd->add_flag("--no-pretrained", f.no_pretrained, "Random backbone initialization");
  cmd->add_option("--run-name", f.run_name, "Run directory name (default: timestamp-hash)");
}

lf::ExperimentConfig build_config(const CellFlags& f) {
  lf::ExperimentConfig c;
  if (!f.config.empty()) c = lf::load_experiment_config(f.config);
  if (!f.manifest.empty()) c.manifest = f.manifest;
  if (!f.backbones.empty()) {
    c.backbones.clear();
    for (const auto& name : f.backbones) {
      const auto b = lf::parse_backbone(name);
      if (!b) throw lf::InvalidArgument(fmt::format("unknown backbone '{}'", name));
      c.backbones.push_back(*b);
    }
  }
  if (!f.scenarios.empty()) {
    c.scenarios.clear();
    for (const auto& s : f.scenarios) c.scenarios.push_back(lf::parse_scenario(s));
  }
  if (!f.cf.empty()) c.cf = f.cf;
  if (f.folds) c.folds = *f.folds;
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.output = f.out;
  if (!f.only_folds.empty()) c.only_folds = f.only_folds;
  if (f.phase1_epochs) c.train.phase1_epochs = *f.phase1_epochs;
  if (f.phase2_epochs) c.train.phase2_epochs = *f.phase2_epochs;
  if (f.image_side) c.image_side = *f.image_side;
  if (f.no_augment) c.train.augment = lf::AugmentPolicy::identity();
  if (f.no_pretrained) c.pretrained = false;
  return c;
}

int run_cells(const lf::ExperimentConfig& config, const CellFlags& f) {
  lf::RunOptions options;
  if (!f.run_name.empty()) options.run_name = f.run_name;
  options.log = [](const std::string& msg) { fmt::print(stderr, "{}\n", msg); };
  const auto art = lf::run_experiment(config, options);
  std::size_t failed = 0;
  for (const auto& cell : art.cells)
    for (const auto& fold : cell.folds) failed += fold.completed ? 0 : 1;
  fmt::print("{}\n", art.run_dir.string());
  return failed == 0 ? 0 : 3;
}

void write_or_print(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
  } else {
    lf::write_text_atomic(out, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skin-lesion image and clinical-metadata fusion toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "lesionfuse 0.1.0");

  // preprocess
  std::string pre_manifest, pre_out, pre_p = "6";
  std::optional<int> pre_side;
  auto* pre = app.add_subcommand("preprocess", "Apply shades-of-gray color constancy to a dataset");
  pre->add_option("--manifest", pre_manifest, "Input manifest CSV")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", pre_out, "Output dataset directory")->required();
  pre->add_option("--p", pre_p, "Minkowski norm order, or 'inf'");
  pre->add_option("--side", pre_side, "Also resize to side x side");

  // synth
  std::string syn_out;
  std::size_t syn_size = 600;
  std::uint64_t syn_seed = 0;
  double syn_image = 0.5, syn_clinical = 0.5;
  int syn_side = 32;
  bool syn_metadata_only = false;
  std::vector<double> syn_props;
  auto* syn = app.add_subcommand("synth", "Generate a labelled synthetic dataset");
  syn->add_option("--out", syn_out, "Output dataset directory")->required();
  syn->add_option("--size", syn_size, "Number of lesions");
  syn->add_option("--seed", syn_seed, "Generator seed");
  syn->add_option("--image-info", syn_image, "Informativeness of images in [0, 1]");
  syn->add_option("--clinical-info", syn_clinical, "Informativeness of clinical fields in [0, 1]");
  syn->add_option("--side", syn_side, "Image side in pixels");
  syn->add_option("--proportions", syn_props, "Six class proportions ACK BCC MEL NEV SCC SEK")->expected(6);
  syn->add_flag("--metadata-only", syn_metadata_only, "Skip image rendering");

  // train / sweep
  CellFlags train_flags, sweep_flags;
  auto* train = app.add_subcommand("train", "Cross-validated training of configured cells");
  add_cell_flags(train, train_flags);
  auto* sweep = app.add_subcommand("sweep", "Sweep the combination factor (default 0.5 to 0.9)");
  add_cell_flags(sweep, sweep_flags);

  // evaluate
  std::string ev_ckpt, ev_manifest, ev_out;
  bool ev_all = false;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on its test fold");
  evaluate->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--manifest", ev_manifest, "Dataset manifest CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", ev_out, "Write the metrics JSON here instead of stdout");
  evaluate->add_flag("--all", ev_all, "Evaluate every manifest record instead of the test fold");

  // stats
  std::string st_scores, st_out;
  double st_alpha_f = 0.05, st_alpha_w = 0.01;
  bool st_holm = false;
  auto* stats = app.add_subcommand("stats", "Friedman and pairwise Wilcoxon tests on fold scores");
  stats->add_option("--scores", st_scores, "CSV: header of treatment names, one row per block")
      ->required()
      ->check(CLI::ExistingFile);
  stats->add_option("--alpha-friedman", st_alpha_f, "Friedman significance level");
  stats->add_option("--alpha-wilcoxon", st_alpha_w, "Wilcoxon significance level");
  stats->add_flag("--holm", st_holm, "Holm-correct the pairwise p-values");
  stats->add_option("--out", st_out, "Write the report JSON here instead of stdout");

  // report
  std::vector<std::string> rep_runs;
  std::string rep_out;
  auto* report = app.add_subcommand("report", "Regenerate tables, plots and comparisons for runs");
  report->add_option("--run", rep_runs, "Run directory (repeat to pool runs)")->required();
  report->add_option("--out", rep_out, "Pooled comparison JSON when several runs are given");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) {
      lf::ColorConstancyConfig cc;
      cc.p = pre_p == "inf" ? std::numeric_limits<double>::infinity() : std::stod(pre_p);
      const auto manifest = lf::load_manifest(pre_manifest);
      const auto out = lf::preprocess_dataset(manifest, pre_out, cc, pre_side);
      fmt::print("{}\n", (fs::path(pre_out) / "manifest.csv").string());
      (void)out;
      return 0;
    }
    if (*syn) {
      lf::SyntheticConfig sc;
      sc.size = syn_size;
      sc.seed = syn_seed;
      sc.informativeness = {syn_image, syn_clinical};
      sc.image_side = syn_side;
      sc.render_images = !syn_metadata_only;
      if (!syn_props.empty()) std::copy(syn_props.begin(), syn_props.end(), sc.proportions.begin());
      const auto data = lf::generate_synthetic(sc, fs::path(syn_out));
      const auto hist = data.manifest.label_histogram();
      fmt::print(stderr, "generated {} synthetic lesions:", data.manifest.size());
      for (auto d : lf::kAllDiagnoses) fmt::print(stderr, " {}={}", lf::display_name(d), hist[lf::index_of(d)]);
      fmt::print(stderr, "\n");
      fmt::print("{}\n", (fs::path(syn_out) / "manifest.csv").string());
      return 0;
    }
    if (*train) return run_cells(build_config(train_flags), train_flags);
    if (*sweep) {
      auto config = build_config(sweep_flags);
      if (sweep_flags.cf.empty()) config.cf = lf::kSweepFactors;
      if (sweep_flags.scenarios.empty() && sweep_flags.config.empty()) config.scenarios = {lf::Scenario::fused};
      return run_cells(config, sweep_flags);
    }
    if (*evaluate) {
      const auto metrics = lf::evaluate_checkpoint(ev_ckpt, ev_manifest, ev_all);
      write_or_print(ev_out, lf::to_json(metrics).dump(2) + "\n");
      fmt::print(stderr, "ACC {:.4f} BACC {:.4f} F1 {:.4f} AUC {:.4f}\n", metrics.acc, metrics.bacc,
                 metrics.f1_weighted, metrics.auc);
      return 0;
    }
    if (*stats) {
      lf::CompareOptions options;
      options.alpha_friedman = st_alpha_f;
      options.alpha_wilcoxon = st_alpha_w;
      options.holm = st_holm;
      const auto result = lf::compare_models(lf::load_score_csv(st_scores), options);
      write_or_print(st_out, lf::to_json(result).dump(2) + "\n");
      if (!st_out.empty())
        fmt::print("Friedman chi2 = {:.4f} (df {}), p = {:.4g}; pairwise tests {}\n",
                   result.friedman.statistic, result.friedman.df, result.friedman.p_value,
                   result.pairwise ? "run" : "skipped");
      return 0;
    }
    if (*report) {
      std::vector<lf::RunArtifacts> runs;
      for (const auto& r : rep_runs) {
        runs.push_back(lf::load_artifacts(r));
        for (const auto& file : lf::emit_reports(runs.back())) fmt::print("{}\n", file.string());
      }
      if (runs.size() > 1) {
        const auto scores = lf::fold_score_matrix(runs);
        nlohmann::json j = {{"metric", "BACC"}, {"runs", rep_runs}};
        j["comparison"] = lf::to_json(lf::compare_models(scores));
        write_or_print(rep_out, j.dump(2) + "\n");
      }
      return 0;
    }
  } catch (const lf::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
