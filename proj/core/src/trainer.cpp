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

#include "lesionfuse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "json_reader.hpp"
#include "lesionfuse/error.hpp"
#include "lesionfuse/nn/optim.hpp"

namespace lesionfuse {

std::string_view to_string(MonitorMetric m) { return m == MonitorMetric::loss ? "loss" : "bacc"; }

MonitorMetric parse_monitor(std::string_view text) {
  if (text == "loss") return MonitorMetric::loss;
  if (text == "bacc") return MonitorMetric::bacc;
  throw InvalidArgument(fmt::format("unknown monitor metric '{}' (expected loss or bacc)", text));
}

void TrainConfig::validate() const {
  if (phase1_epochs < 0 || phase2_epochs < 0) throw InvalidArgument("epoch counts must be non-negative");
  if (phase1_epochs + phase2_epochs == 0) throw InvalidArgument("at least one training epoch is required");
  if (!(lr_phase1 > 0.0) || !(lr_phase2 > 0.0)) throw InvalidArgument("learning rates must be positive");
  if (lr_phase2 > lr_phase1) throw InvalidArgument("phase-2 learning rate must not exceed phase-1 rate");
  if (plateau_patience <= 0 || early_stop_patience <= 0)
    throw InvalidArgument("patience values must be positive");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0))
    throw InvalidArgument("plateau factor must lie in (0, 1)");
  if (batch_size <= 0) throw InvalidArgument("batch size must be positive");
  if (min_improvement < 0.0) throw InvalidArgument("min_improvement must be non-negative");
  augment.validate();
}

nlohmann::json to_json(const AugmentPolicy& p) {
  return {{"color_enabled", p.color_enabled},
          {"brightness", p.brightness},
          {"contrast", p.contrast},
          {"saturation", p.saturation},
          {"hue", p.hue},
          {"hflip_enabled", p.hflip_enabled},
          {"hflip_probability", p.hflip_probability},
          {"vflip_enabled", p.vflip_enabled},
          {"vflip_probability", p.vflip_probability},
          {"rotation_enabled", p.rotation_enabled},
          {"rotation_degrees", p.rotation_degrees},
          {"translation_enabled", p.translation_enabled},
          {"translation_fraction", p.translation_fraction},
          {"scale_enabled", p.scale_enabled},
          {"scale_min", p.scale_min},
          {"scale_max", p.scale_max},
          {"shear_enabled", p.shear_enabled},
          {"shear_degrees", p.shear_degrees},
          {"noise_enabled", p.noise_enabled},
          {"noise_std", p.noise_std},
          {"blur_enabled", p.blur_enabled},
          {"blur_min", p.blur_min},
          {"blur_max", p.blur_max}};
}

AugmentPolicy augment_policy_from_json(const nlohmann::json& j) {
  AugmentPolicy p;
  if (j.is_boolean()) return j.get<bool>() ? p : AugmentPolicy::identity();
  detail::JsonReader r(j, "augment");
  r.get("color_enabled", p.color_enabled)
      .get("brightness", p.brightness)
      .get("contrast", p.contrast)
      .get("saturation", p.saturation)
      .get("hue", p.hue)
      .get("hflip_enabled", p.hflip_enabled)
      .get("hflip_probability", p.hflip_probability)
      .get("vflip_enabled", p.vflip_enabled)
      .get("vflip_probability", p.vflip_probability)
      .get("rotation_enabled", p.rotation_enabled)
      .get("rotation_degrees", p.rotation_degrees)
      .get("translation_enabled", p.translation_enabled)
      .get("translation_fraction", p.translation_fraction)
      .get("scale_enabled", p.scale_enabled)
      .get("scale_min", p.scale_min)
      .get("scale_max", p.scale_max)
      .get("shear_enabled", p.shear_enabled)
      .get("shear_degrees", p.shear_degrees)
      .get("noise_enabled", p.noise_enabled)
      .get("noise_std", p.noise_std)
      .get("blur_enabled", p.blur_enabled)
      .get("blur_min", p.blur_min)
      .get("blur_max", p.blur_max)
      .finish();
  p.validate();
  return p;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"phase1_epochs", c.phase1_epochs},
          {"phase2_epochs", c.phase2_epochs},
          {"lr_phase1", c.lr_phase1},
          {"lr_phase2", c.lr_phase2},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"plateau_factor", c.plateau_factor},
          {"plateau_patience", c.plateau_patience},
          {"early_stop_patience", c.early_stop_patience},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"monitor", to_string(c.monitor)},
          {"min_improvement", c.min_improvement},
          {"augment", to_json(c.augment)},
          {"cache_frozen_features", c.cache_frozen_features}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  detail::JsonReader r(j, "train");
  std::string monitor(to_string(c.monitor));
  r.get("phase1_epochs", c.phase1_epochs)
      .get("phase2_epochs", c.phase2_epochs)
      .get("lr_phase1", c.lr_phase1)
      .get("lr_phase2", c.lr_phase2)
      .get("beta1", c.beta1)
      .get("beta2", c.beta2)
      .get("adam_eps", c.adam_eps)
      .get("plateau_factor", c.plateau_factor)
      .get("plateau_patience", c.plateau_patience)
      .get("early_stop_patience", c.early_stop_patience)
      .get("batch_size", c.batch_size)
      .get("seed", c.seed)
      .get("monitor", monitor)
      .get("min_improvement", c.min_improvement)
      .get("cache_frozen_features", c.cache_frozen_features);
  if (r.has("augment")) c.augment = augment_policy_from_json(r.at("augment"));
  r.finish();
  c.monitor = parse_monitor(monitor);
  c.validate();
  return c;
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "phase,epoch,train_loss,val_loss,val_bacc,lr\n";
  for (const auto& e : epochs)
    out << fmt::format("{},{},{:.12g},{:.12g},{:.12g},{:.6g}\n", e.phase, e.epoch, e.train_loss,
                       e.val_loss, e.val_bacc, e.lr);
}

void TrainHistory::save_csv(const std::filesystem::path& file) const {
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(fmt::format("cannot write {}", tmp));
    write_csv(out);
  }
  std::filesystem::rename(tmp, file);
}

int TrainHistory::epochs_in_phase(int phase) const {
  return static_cast<int>(
      std::count_if(epochs.begin(), epochs.end(), [&](const auto& e) { return e.phase == phase; }));
}

double weighted_cross_entropy(std::span<const double> probabilities, std::size_t label,
                              double weight) {
  return -weight * std::log(std::max(probabilities[label], kLossEpsilon));
}

double weighted_cross_entropy(std::span<const double> probabilities, Diagnosis label,
                              const ClassWeights& weights) {
  return weighted_cross_entropy(probabilities, index_of(label), weights[label]);
}

nn::Tensor weighted_cross_entropy_grad(const nn::Tensor& probabilities, std::size_t label,
                                       double weight) {
  nn::Tensor g(probabilities.shape);
  const double py = probabilities.data[label];
  // Zero below the clamp, where the loss is flat in the logits.
  const double scale = py > kLossEpsilon ? -weight : 0.0;
  for (std::size_t j = 0; j < g.data.size(); ++j)
    g.data[j] = scale * ((j == label ? 1.0 : 0.0) - probabilities.data[j]);
  return g;
}

double batch_weighted_loss(const ProbabilityRows& probabilities, std::span<const int> labels,
                           std::span<const double> class_weights) {
  if (probabilities.size() != labels.size()) throw InvalidArgument("batch loss: length mismatch");
  double loss = 0.0, weight = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    loss += weighted_cross_entropy(probabilities[i], y, class_weights[y]);
    weight += class_weights[y];
  }
  if (weight <= 0.0) throw InvalidArgument("batch loss: no weight applied");
  return loss / weight;
}

PatienceTracker::PatienceTracker(bool minimize, double min_improvement, int plateau_patience,
                                 int stop_patience)
    : minimize_(minimize),
      threshold_(min_improvement),
      plateau_patience_(plateau_patience),
      stop_patience_(stop_patience) {}

PatienceTracker::Step PatienceTracker::update(double value) {
  Step s;
  s.improved = !best_ || (minimize_ ? value < *best_ - threshold_ : value > *best_ + threshold_);
  if (s.improved) {
    best_ = value;
    plateau_bad_ = 0;
    stop_bad_ = 0;
    return s;
  }
  ++plateau_bad_;
  ++stop_bad_;
  if (plateau_bad_ >= plateau_patience_) {
    s.reduce_lr = true;
    plateau_bad_ = 0;
  }
  s.stop = stop_bad_ >= stop_patience_;
  return s;
}

namespace {

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(c)};
  return std::mt19937_64(seq);
}

std::vector<nn::Parameter*> trainable(nn::ParameterList params) {
  std::vector<nn::Parameter*> out;
  for (auto& p : params)
    if (!p.param->buffer) out.push_back(p.param);
  return out;
}

struct Validation {
  double loss = 0.0;
  double bacc = 0.0;
};

}  // namespace

ProbabilityRows predict_indices(LesionModel& model, const SampleStore& store,
                                std::span<const std::size_t> indices) {
  ProbabilityRows out;
  out.reserve(indices.size());
  for (auto i : indices) {
    const auto p = model.predict(store.network_input(store.image(i)), store.clinical(i));
    out.push_back(p.data);
  }
  return out;
}

TrainResult train_two_phase(LesionModel& model, const SampleStore& store,
                            const DatasetManifest& manifest, const FoldAssignment& folds,
                            std::size_t fold_index, const TrainConfig& config) {
  if (fold_index >= folds.k)
    throw InvalidArgument(fmt::format("fold index {} outside [0, {})", fold_index, folds.k));
  const auto split = split_for_fold(manifest, folds, fold_index);
  return train_two_phase(model, store, split.train, split.validation, config);
}

TrainResult train_two_phase(LesionModel& model, const SampleStore& store,
                            std::span<const std::size_t> train,
                            std::span<const std::size_t> validation, const TrainConfig& config) {
  config.validate();
  if (validation.empty()) throw InvalidArgument("validation slice is empty");
  const auto hist = store.histogram(train);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (hist[c] == 0)
      throw TrainingError(fmt::format("training slice has no samples of class {}",
                                      token(static_cast<Diagnosis>(c))));
  const ClassWeights weights = class_weights(hist);

  std::vector<int> val_labels;
  for (auto i : validation) val_labels.push_back(static_cast<int>(index_of(store.label(i))));

  const bool minimize = config.monitor == MonitorMetric::loss;
  TrainResult result;
  std::optional<double> global_best;
  std::vector<nn::Tensor> best_snapshot;

  // Backbone outputs do not change while it is frozen.
  std::vector<nn::Tensor> cached_train, cached_val;
  auto frozen_features = [&](std::span<const std::size_t> indices) {
    std::vector<nn::Tensor> out;
    out.reserve(indices.size());
    nn::RunContext ctx{.training = false, .record = false};
    for (auto i : indices) out.push_back(model.features(store.network_input(store.image(i)), ctx));
    return out;
  };

  auto validate_epoch = [&](int phase) {
    ProbabilityRows probs;
    probs.reserve(validation.size());
    for (std::size_t v = 0; v < validation.size(); ++v) {
      const auto i = validation[v];
      nn::RunContext ctx{.training = false, .record = false};
      const nn::Tensor f = phase == 1 ? cached_val[v]
                                      : model.features(store.network_input(store.image(i)), ctx);
      probs.push_back(nn::softmax(model.logits_from_features(f, store.clinical(i), ctx)).data);
    }
    Validation out;
    out.loss = batch_weighted_loss(probs, val_labels, weights.w);
    std::vector<int> predicted;
    for (const auto& p : probs) predicted.push_back(argmax(p));
    out.bacc = balanced_accuracy(confusion_matrix(val_labels, predicted));
    return out;
  };

  for (int phase = 1; phase <= 2; ++phase) {
    const int max_epochs = phase == 1 ? config.phase1_epochs : config.phase2_epochs;
    if (max_epochs == 0) continue;
    set_trainable(model.backbone(), phase == 2);
    double lr = phase == 1 ? config.lr_phase1 : config.lr_phase2;
    nn::Adam adam(trainable(model.parameters()),
                  {.lr = lr, .beta1 = config.beta1, .beta2 = config.beta2, .eps = config.adam_eps});
    PatienceTracker tracker(minimize, config.min_improvement, config.plateau_patience,
                            config.early_stop_patience);

    const bool augmenting = config.augment.any_enabled();
    if (phase == 1) {
      cached_val = frozen_features(validation);
      cached_train.clear();
      if (config.cache_frozen_features && !augmenting) cached_train = frozen_features(train);
    } else {
      cached_train.clear();
      cached_val.clear();
    }

    std::vector<std::size_t> order(train.size());
    for (int epoch = 1; epoch <= max_epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      auto shuffle_rng = sample_rng(config.seed, 0xffffffffu, static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(phase));
      std::shuffle(order.begin(), order.end(), shuffle_rng);

      double loss_sum = 0.0, weight_sum = 0.0;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
        double batch_weight = 0.0;
        for (std::size_t b = start; b < stop; ++b) batch_weight += weights[store.label(train[order[b]])];

        adam.zero_grad();
        for (std::size_t b = start; b < stop; ++b) {
          const std::size_t local = order[b];
          const std::size_t idx = train[local];
          auto rng = sample_rng(config.seed, idx, static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(phase));
          nn::Tensor f;
          if (!cached_train.empty()) {
            f = cached_train[local];
          } else {
            Image img = store.image(idx);
            if (augmenting) img = augment(img, config.augment, rng);
            nn::RunContext bctx{.training = true, .record = phase == 2, .rng = &rng};
            f = model.features(store.network_input(img), bctx);
          }
          nn::RunContext hctx{.training = true, .record = true, .rng = &rng};
          const nn::Tensor probs = nn::softmax(model.logits_from_features(f, store.clinical(idx), hctx));
          const Diagnosis y = store.label(idx);
          const double w = weights[y];
          const double loss = weighted_cross_entropy(probs.data, index_of(y), w);
          if (!std::isfinite(loss))
            throw TrainingError(fmt::format(
                "non-finite loss in phase {} epoch {} at sample {} (label {}, lr {:g})", phase, epoch,
                idx, token(y), lr));
          nn::Tensor grad = weighted_cross_entropy_grad(probs, index_of(y), w);
          for (auto& g : grad.data) g /= batch_weight;
          model.backward(grad);
          loss_sum += loss;
          weight_sum += w;
        }
        adam.step();
      }

      const Validation val = validate_epoch(phase);
      if (!std::isfinite(val.loss))
        throw TrainingError(fmt::format("non-finite validation loss in phase {} epoch {}", phase, epoch));
      result.history.epochs.push_back({phase, epoch, loss_sum / weight_sum, val.loss, val.bacc, lr});

      const double monitor = minimize ? val.loss : val.bacc;
      if (!global_best || (minimize ? monitor < *global_best : monitor > *global_best)) {
        global_best = monitor;
        best_snapshot = model.snapshot();
        result.best_monitor = monitor;
        result.best_phase = phase;
        result.best_epoch = epoch;
      }
      const auto step = tracker.update(monitor);
      if (step.stop) break;
      if (step.reduce_lr) {
        lr *= config.plateau_factor;
        adam.set_lr(lr);
      }
    }
  }
  set_trainable(model.backbone(), true);
  if (!best_snapshot.empty()) model.restore(best_snapshot);
  return result;
}

}  // namespace lesionfuse
