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

// Experiment configuration, cross-validated runs and their on-disk layout:
//   <output>/<timestamp>-<hash>/<backbone>/<scenario>/cf<val>/fold<k>/

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lesionfuse/backbones.hpp"
#include "lesionfuse/data_model.hpp"
#include "lesionfuse/evaluation.hpp"
#include "lesionfuse/fusion.hpp"
#include "lesionfuse/preprocess.hpp"
#include "lesionfuse/trainer.hpp"

namespace lesionfuse {

/// The combination factors compared in the c_f sweep.
inline const std::vector<double> kSweepFactors = {0.5, 0.6, 0.7, 0.8, 0.9};

struct ExperimentConfig {
  std::filesystem::path manifest;
  std::filesystem::path output = "runs";
  std::vector<BackboneName> backbones = {BackboneName::resnet50};
  std::vector<Scenario> scenarios = {Scenario::image_only, Scenario::fused};
  std::vector<double> cf = {0.8};
  TrainConfig train;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  bool group_by_patient = true;
  /// Load cached ImageNet weights; ignored for the test backbone.
  bool pretrained = true;
  std::optional<ColorConstancyConfig> color_constancy = ColorConstancyConfig{};
  int image_side = 224;
  double age_scale = kDefaultAgeScale;
  double dropout = kHeadDropout;
  /// Restrict training to these test folds; empty runs all of them.
  std::vector<std::size_t> only_folds;

  /// Throws InvalidArgument before any work is done.
  void validate(bool check_paths = true) const;
  ImageOptions image_options() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Relative paths resolve against `base_dir`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

/// FNV-1a over the canonical JSON form, excluding the output directory.
std::string config_hash(const ExperimentConfig& config);

/// "0.8" -> "cf0.8"
std::string cf_label(double cf);

struct CellKey {
  BackboneName backbone = BackboneName::tiny;
  Scenario scenario = Scenario::fused;
  double cf = 0.8;

  /// "resnet50/fused/cf0.8"
  std::string path() const;
  /// "resnet50 fused cf=0.8"
  std::string label() const;
};

struct FoldOutcome {
  std::size_t fold = 0;
  bool completed = false;
  std::string error;
  std::optional<MetricsReport> metrics;
  std::filesystem::path dir;
};

struct CellResult {
  CellKey key;
  std::vector<FoldOutcome> folds;
  /// Over completed folds only; empty with fewer than two.
  std::optional<AggregateRow> aggregate;

  std::vector<MetricsReport> completed_reports() const;
};

struct RunArtifacts {
  std::filesystem::path run_dir;
  ExperimentConfig config;
  FoldAssignment folds;
  bool synthetic = false;
  std::vector<CellResult> cells;

  const CellResult* find(BackboneName backbone, Scenario scenario, double cf) const;
};

struct RunOptions {
  /// Run directory name; defaults to <UTC timestamp>-<config hash>.
  std::optional<std::string> run_name;
  std::function<void(const std::string&)> log;
  bool emit_reports = true;
};

/// Trains and evaluates every configured cell and fold. Fold failures are
/// recorded and the run continues.
RunArtifacts run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Rebuilds artifacts from a run directory's persisted files.
RunArtifacts load_artifacts(const std::filesystem::path& run_dir);

/// Applies color constancy (and optional resizing) to every image and writes
/// a new manifest under `out_dir`.
DatasetManifest preprocess_dataset(const DatasetManifest& manifest, const std::filesystem::path& out_dir,
                                   const ColorConstancyConfig& config, std::optional<int> side = std::nullopt);

/// Evaluates a checkpoint on the test fold it was trained for, or on every
/// manifest record when `whole_manifest` is set.
MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                  const std::filesystem::path& manifest, bool whole_manifest = false);

/// Writes text atomically (temporary file, then rename).
void write_text_atomic(const std::filesystem::path& file, const std::string& text);

}  // namespace lesionfuse
