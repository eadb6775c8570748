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

// Two-phase training with weighted cross-entropy, plateau decay and early
// stopping.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lesionfuse/data_model.hpp"
#include "lesionfuse/evaluation.hpp"
#include "lesionfuse/model.hpp"
#include "lesionfuse/preprocess.hpp"

namespace lesionfuse {

enum class MonitorMetric { loss, bacc };

std::string_view to_string(MonitorMetric m);
MonitorMetric parse_monitor(std::string_view text);

struct TrainConfig {
  int phase1_epochs = 50;
  int phase2_epochs = 100;
  double lr_phase1 = 1e-4;
  double lr_phase2 = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double plateau_factor = 0.1;
  int plateau_patience = 10;
  int early_stop_patience = 15;
  int batch_size = 32;
  std::uint64_t seed = 0;
  MonitorMetric monitor = MonitorMetric::loss;
  /// A monitor change counts as improvement only beyond this absolute margin.
  double min_improvement = 1e-4;
  AugmentPolicy augment;
  /// Reuse backbone features across phase-1 epochs when augmentation is off.
  bool cache_frozen_features = true;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AugmentPolicy& policy);
AugmentPolicy augment_policy_from_json(const nlohmann::json& j);

struct EpochRecord {
  int phase = 1;
  int epoch = 1;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_bacc = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  void write_csv(std::ostream& out) const;
  void save_csv(const std::filesystem::path& file) const;
  int epochs_in_phase(int phase) const;
};

inline constexpr double kLossEpsilon = 1e-12;

/// -w * log(max(p_label, eps)); eps guards log 0 and keeps the loss
/// non-negative at p_label = 1.
double weighted_cross_entropy(std::span<const double> probabilities, std::size_t label,
                              double weight);
double weighted_cross_entropy(std::span<const double> probabilities, Diagnosis label,
                              const ClassWeights& weights);

/// Gradient of weighted_cross_entropy with respect to the logits that
/// produced `probabilities` through softmax.
nn::Tensor weighted_cross_entropy_grad(const nn::Tensor& probabilities, std::size_t label,
                                       double weight);

/// Sum of per-sample losses divided by the sum of applied weights.
double batch_weighted_loss(const ProbabilityRows& probabilities, std::span<const int> labels,
                           std::span<const double> class_weights);

/// Counts epochs without improvement for the plateau and early-stop rules.
class PatienceTracker {
 public:
  PatienceTracker(bool minimize, double min_improvement, int plateau_patience,
                  int stop_patience);

  struct Step {
    bool improved = false;
    bool reduce_lr = false;
    bool stop = false;
  };

  Step update(double value);
  std::optional<double> best() const { return best_; }

 private:
  bool minimize_;
  double threshold_;
  int plateau_patience_;
  int stop_patience_;
  std::optional<double> best_;
  int plateau_bad_ = 0;
  int stop_bad_ = 0;
};

struct TrainResult {
  TrainHistory history;
  double best_monitor = 0.0;
  int best_phase = 0;
  int best_epoch = 0;
};

/// Phase 1 trains the head over a frozen backbone; phase 2 fine-tunes
/// everything at the lower rate. The model ends holding the parameters of the
/// best validation epoch over both phases.
TrainResult train_two_phase(LesionModel& model, const SampleStore& store,
                            std::span<const std::size_t> train,
                            std::span<const std::size_t> validation, const TrainConfig& config);

TrainResult train_two_phase(LesionModel& model, const SampleStore& store,
                            const DatasetManifest& manifest, const FoldAssignment& folds,
                            std::size_t fold_index, const TrainConfig& config);

/// Eval-mode class probabilities for the given store indices.
ProbabilityRows predict_indices(LesionModel& model, const SampleStore& store,
                                std::span<const std::size_t> indices);

}  // namespace lesionfuse
