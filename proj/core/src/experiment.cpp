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

#include "lesionfuse/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "json_reader.hpp"
#include "lesionfuse/error.hpp"
#include "lesionfuse/image.hpp"
#include "lesionfuse/model.hpp"
#include "lesionfuse/report.hpp"
#include "lesionfuse/synthetic.hpp"

namespace lesionfuse {

namespace fs = std::filesystem;

void ExperimentConfig::validate(bool check_paths) const {
  if (manifest.empty()) throw InvalidArgument("config: manifest path is required");
  if (check_paths && !fs::exists(manifest))
    throw InvalidArgument(fmt::format("config: manifest '{}' does not exist", manifest.string()));
  if (backbones.empty()) throw InvalidArgument("config: at least one backbone is required");
  if (scenarios.empty()) throw InvalidArgument("config: at least one scenario is required");
  if (cf.empty()) throw InvalidArgument("config: at least one c_f value is required");
  for (double v : cf)
    if (!(v >= 0.0 && v < 1.0))
      throw InvalidArgument(fmt::format("config: c_f = {} outside [0, 1)", v));
  for (double v : cf) (void)reduced_image_features(static_cast<int>(kClinicalFeatures), v);
  if (folds < 2) throw InvalidArgument("config: at least two folds are required");
  for (auto f : only_folds)
    if (f >= folds) throw InvalidArgument(fmt::format("config: fold {} outside [0, {})", f, folds));
  if (image_side < 8) throw InvalidArgument("config: image_side must be at least 8");
  if (!(age_scale > 0.0)) throw InvalidArgument("config: age_scale must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("config: dropout must lie in [0, 1)");
  train.validate();
}

ImageOptions ExperimentConfig::image_options() const {
  ImageOptions o;
  o.side = image_side;
  o.age_scale = age_scale;
  o.color_constancy = color_constancy;
  return o;
}

namespace {

nlohmann::json color_constancy_json(const std::optional<ColorConstancyConfig>& cc) {
  if (!cc) return false;
  nlohmann::json j = {{"p", std::isinf(cc->p) ? nlohmann::json("inf") : nlohmann::json(cc->p)},
                      {"zero_channel", cc->zero_channel == ZeroChannelPolicy::identity ? "identity" : "error"}};
  if (cc->output_gamma) j["output_gamma"] = *cc->output_gamma;
  return j;
}

std::optional<ColorConstancyConfig> color_constancy_from(const nlohmann::json& j) {
  if (j.is_null() || (j.is_boolean() && !j.get<bool>())) return std::nullopt;
  ColorConstancyConfig cc;
  if (j.is_boolean()) return cc;
  detail::JsonReader r(j, "color_constancy");
  nlohmann::json p = cc.p;
  std::string zero = "identity";
  std::optional<double> gamma;
  r.get("p", p).get("zero_channel", zero);
  if (r.has("output_gamma")) gamma = r.at("output_gamma").get<double>();
  r.finish();
  if (p.is_string()) {
    if (p.get<std::string>() != "inf") throw FormatError("color_constancy.p must be a number or \"inf\"");
    cc.p = std::numeric_limits<double>::infinity();
  } else {
    cc.p = p.get<double>();
  }
  if (!(cc.p >= 1.0)) throw InvalidArgument("color_constancy.p must be at least 1");
  if (zero == "error")
    cc.zero_channel = ZeroChannelPolicy::error;
  else if (zero != "identity")
    throw FormatError("color_constancy.zero_channel must be identity or error");
  cc.output_gamma = gamma;
  return cc;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

nlohmann::json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(fmt::format("cannot open {}", file.string()));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("{}: {}", file.string(), e.what()));
  }
}

}  // namespace

nlohmann::json to_json(const ExperimentConfig& c) {
  std::vector<std::string> backbones, scenarios;
  for (auto b : c.backbones) backbones.emplace_back(to_string(b));
  for (auto s : c.scenarios) scenarios.emplace_back(to_string(s));
  return {{"manifest", c.manifest.string()},
          {"output", c.output.string()},
          {"backbones", backbones},
          {"scenarios", scenarios},
          {"cf", c.cf},
          {"train", to_json(c.train)},
          {"folds", c.folds},
          {"seed", c.seed},
          {"group_by_patient", c.group_by_patient},
          {"pretrained", c.pretrained},
          {"color_constancy", color_constancy_json(c.color_constancy)},
          {"image_side", c.image_side},
          {"age_scale", c.age_scale},
          {"dropout", c.dropout},
          {"only_folds", c.only_folds}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  detail::JsonReader r(j, "config");
  std::string manifest, output = c.output.string();
  std::vector<std::string> backbones, scenarios;
  r.get("manifest", manifest)
      .get("output", output)
      .get("backbones", backbones)
      .get("scenarios", scenarios)
      .get("cf", c.cf)
      .get("folds", c.folds)
      .get("seed", c.seed)
      .get("group_by_patient", c.group_by_patient)
      .get("pretrained", c.pretrained)
      .get("image_side", c.image_side)
      .get("age_scale", c.age_scale)
      .get("dropout", c.dropout)
      .get("only_folds", c.only_folds);
  if (r.has("backbone")) backbones = {r.at("backbone").get<std::string>()};
  if (r.has("scenario")) scenarios = {r.at("scenario").get<std::string>()};
  if (r.has("train")) c.train = train_config_from_json(r.at("train"));
  if (r.has("augment")) c.train.augment = augment_policy_from_json(r.at("augment"));
  if (r.has("color_constancy")) c.color_constancy = color_constancy_from(r.at("color_constancy"));
  r.finish();
  c.manifest = resolve(manifest, base_dir);
  c.output = resolve(output, base_dir);
  if (!backbones.empty()) {
    c.backbones.clear();
    for (const auto& name : backbones) {
      const auto b = parse_backbone(name);
      if (!b) throw InvalidArgument(fmt::format("config: unknown backbone '{}'", name));
      c.backbones.push_back(*b);
    }
  }
  if (!scenarios.empty()) {
    c.scenarios.clear();
    for (const auto& s : scenarios) c.scenarios.push_back(parse_scenario(s));
  }
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& file) {
  return experiment_config_from_json(read_json(file), file.parent_path());
}

std::string config_hash(const ExperimentConfig& config) {
  auto j = to_json(config);
  j.erase("output");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string cf_label(double cf) { return fmt::format("cf{:g}", cf); }

std::string CellKey::path() const {
  return fmt::format("{}/{}/{}", to_string(backbone), to_string(scenario), cf_label(cf));
}

std::string CellKey::label() const {
  return fmt::format("{} {} cf={:g}", to_string(backbone), to_string(scenario), cf);
}

std::vector<MetricsReport> CellResult::completed_reports() const {
  std::vector<MetricsReport> out;
  for (const auto& f : folds)
    if (f.completed && f.metrics) out.push_back(*f.metrics);
  return out;
}

const CellResult* RunArtifacts::find(BackboneName backbone, Scenario scenario, double cf) const {
  for (const auto& c : cells)
    if (c.key.backbone == backbone && c.key.scenario == scenario && c.key.cf == cf) return &c;
  return nullptr;
}

void write_text_atomic(const fs::path& file, const std::string& text) {
  fs::create_directories(file.parent_path());
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
    out << text;
    if (!out) throw Error(fmt::format("write failed for {}", tmp.string()));
  }
  fs::rename(tmp, file);
}

namespace {

void aggregate_cell(CellResult& cell) {
  const auto reports = cell.completed_reports();
  cell.aggregate.reset();
  if (reports.size() < 2) return;
  auto row = aggregate_folds(reports);
  row.model = std::string(to_string(cell.key.backbone));
  row.scenario = std::string(to_string(cell.key.scenario));
  row.cf = cell.key.cf;
  cell.aggregate = row;
}

std::vector<std::size_t> fold_list(const ExperimentConfig& c) {
  if (!c.only_folds.empty()) return c.only_folds;
  std::vector<std::size_t> all(c.folds);
  for (std::size_t i = 0; i < c.folds; ++i) all[i] = i;
  return all;
}

std::string predictions_csv(const DatasetManifest& manifest, std::span<const std::size_t> indices,
                            const ProbabilityRows& probs) {
  std::string out = "lesion_id,label,predicted";
  for (auto d : kAllDiagnoses) out += fmt::format(",p_{}", display_name(d));
  out += '\n';
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& r = manifest.records[indices[i]];
    out += fmt::format("{},{},{}", r.lesion_id, display_name(r.diagnosis),
                       display_name(static_cast<Diagnosis>(argmax(probs[i]))));
    for (double p : probs[i]) out += fmt::format(",{:.9g}", p);
    out += '\n';
  }
  return out;
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  const DatasetManifest manifest = load_manifest(config.manifest);
  if (manifest.size() < config.folds)
    throw InvalidArgument(fmt::format("manifest has {} records, fewer than {} folds", manifest.size(),
                                      config.folds));

  RunArtifacts art;
  art.config = config;
  art.synthetic = is_synthetic_dataset(manifest.root);
  art.folds = make_folds(manifest, config.folds, config.seed, config.group_by_patient);

  std::string name = options.run_name.value_or(fmt::format("{}-{}", utc_stamp(), config_hash(config)));
  art.run_dir = config.output / name;
  if (!options.run_name) {
    for (int n = 2; fs::exists(art.run_dir); ++n) art.run_dir = config.output / fmt::format("{}-{}", name, n);
  }
  fs::create_directories(art.run_dir);
  auto stored = to_json(config);
  stored["manifest"] = fs::absolute(config.manifest).string();
  write_text_atomic(art.run_dir / "config.json",
                    nlohmann::json{{"config", stored},
                                   {"hash", config_hash(config)},
                                   {"synthetic", art.synthetic},
                                   {"records", manifest.size()}}
                            .dump(2) +
                        "\n");
  {
    std::ostringstream folds_csv;
    write_folds_csv(folds_csv, manifest, art.folds);
    write_text_atomic(art.run_dir / "folds.csv", folds_csv.str());
  }
  log(fmt::format("run directory {}", art.run_dir.string()));

  const SampleStore store(manifest, config.image_options());
  for (auto backbone : config.backbones) {
    const bool pretrained = config.pretrained && !is_test_backbone(backbone);
    for (auto scenario : config.scenarios) {
      for (double cf : config.cf) {
        CellResult cell;
        cell.key = {backbone, scenario, cf};
        for (auto f : fold_list(config)) {
          FoldOutcome outcome;
          outcome.fold = f;
          outcome.dir = art.run_dir / cell.key.path() / fmt::format("fold{}", f);
          try {
            fs::create_directories(outcome.dir);
            const auto split = split_for_fold(manifest, art.folds, f);
            const std::uint64_t fold_seed = mix(config.seed ^ mix(f));
            auto model = make_model(backbone, scenario, cf, pretrained, fold_seed, config.dropout);
            TrainConfig tc = config.train;
            tc.seed = mix(fold_seed);
            const auto result = train_two_phase(*model, store, split.train, split.validation, tc);
            result.history.save_csv(outcome.dir / "history.csv");

            const auto probs = predict_indices(*model, store, split.test);
            std::vector<int> truth;
            for (auto i : split.test) truth.push_back(static_cast<int>(index_of(store.label(i))));
            const MetricsReport metrics = evaluate_predictions(probs, truth);
            write_text_atomic(outcome.dir / "predictions.csv", predictions_csv(manifest, split.test, probs));

            CheckpointInfo info;
            info.backbone = backbone;
            info.head = model->head().spec();
            info.train_config = to_json(tc);
            info.fold_index = f;
            info.folds = config.folds;
            info.seed = config.seed;
            info.group_by_patient = config.group_by_patient;
            info.image = config.image_options();
            save_checkpoint(outcome.dir / "checkpoint.lfc", *model, info);
            write_text_atomic(outcome.dir / "metrics.json", to_json(metrics).dump(2) + "\n");

            outcome.metrics = metrics;
            outcome.completed = true;
            log(fmt::format("{} fold {}: BACC {:.3f} ACC {:.3f} ({} epochs)", cell.key.label(), f,
                            metrics.bacc, metrics.acc, result.history.epochs.size()));
          } catch (const std::exception& e) {
            outcome.error = e.what();
            try {
              write_text_atomic(outcome.dir / "error.txt", outcome.error + "\n");
            } catch (const std::exception&) {
            }
            log(fmt::format("{} fold {} failed: {}", cell.key.label(), f, outcome.error));
          }
          cell.folds.push_back(std::move(outcome));
        }
        aggregate_cell(cell);
        art.cells.push_back(std::move(cell));
      }
    }
  }

  const bool any = std::any_of(art.cells.begin(), art.cells.end(),
                               [](const auto& c) { return !c.completed_reports().empty(); });
  if (options.emit_reports && any) {
    for (const auto& file : emit_reports(art)) log(fmt::format("wrote {}", file.string()));
  }
  return art;
}

RunArtifacts load_artifacts(const fs::path& run_dir) {
  const auto stored = read_json(run_dir / "config.json");
  RunArtifacts art;
  art.run_dir = run_dir;
  art.config = experiment_config_from_json(stored.at("config"));
  art.synthetic = stored.value("synthetic", false);
  art.folds.k = art.config.folds;
  if (std::ifstream in(run_dir / "folds.csv"); in) {
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto comma = line.rfind(',');
      if (comma == std::string::npos) continue;
      art.folds.fold_of[line.substr(0, comma)] = std::stoul(line.substr(comma + 1));
    }
  }
  for (auto backbone : art.config.backbones) {
    for (auto scenario : art.config.scenarios) {
      for (double cf : art.config.cf) {
        CellResult cell;
        cell.key = {backbone, scenario, cf};
        for (auto f : fold_list(art.config)) {
          FoldOutcome outcome;
          outcome.fold = f;
          outcome.dir = run_dir / cell.key.path() / fmt::format("fold{}", f);
          if (fs::exists(outcome.dir / "metrics.json")) {
            outcome.metrics = metrics_from_json(read_json(outcome.dir / "metrics.json"));
            outcome.completed = true;
          } else if (std::ifstream err(outcome.dir / "error.txt"); err) {
            std::getline(err, outcome.error);
          } else {
            outcome.error = "missing";
          }
          cell.folds.push_back(std::move(outcome));
        }
        aggregate_cell(cell);
        art.cells.push_back(std::move(cell));
      }
    }
  }
  return art;
}

DatasetManifest preprocess_dataset(const DatasetManifest& manifest, const fs::path& out_dir,
                                   const ColorConstancyConfig& config, std::optional<int> side) {
  if (side && *side < 8) throw InvalidArgument("preprocess: side must be at least 8");
  DatasetManifest out = manifest;
  out.root = out_dir;
  fs::create_directories(out_dir);
  std::size_t passed_through = 0;
  for (auto& r : out.records) {
    Image img = read_image(manifest.image_file(r));
    auto result = shades_of_gray(img, config);
    if (result.passed_through) ++passed_through;
    img = std::move(result.image);
    if (side && (img.height != *side || img.width != *side))
      img = standardize(img, *side, {0, 0, 0}, {1, 1, 1});
    r.image_path = (fs::path("images") / fs::path(r.image_path).filename()).replace_extension(".png").string();
    fs::create_directories((out_dir / r.image_path).parent_path());
    write_image(out_dir / r.image_path, img);
  }
  save_manifest(out_dir / "manifest.csv", out);
  if (is_synthetic_dataset(manifest.root))
    fs::copy_file(manifest.root / kSyntheticMarker, out_dir / kSyntheticMarker,
                  fs::copy_options::overwrite_existing);
  nlohmann::json info = {{"color_constancy", color_constancy_json(config)},
                         {"records", out.size()},
                         {"passed_through", passed_through}};
  if (side) info["side"] = *side;
  write_text_atomic(out_dir / "preprocess.json", info.dump(2) + "\n");
  return out;
}

MetricsReport evaluate_checkpoint(const fs::path& checkpoint, const fs::path& manifest_file,
                                  bool whole_manifest) {
  auto loaded = load_checkpoint(checkpoint);
  const auto manifest = load_manifest(manifest_file);
  std::vector<std::size_t> indices;
  if (whole_manifest) {
    for (std::size_t i = 0; i < manifest.size(); ++i) indices.push_back(i);
  } else {
    const auto folds = make_folds(manifest, loaded.info.folds, loaded.info.seed, loaded.info.group_by_patient);
    indices = split_for_fold(manifest, folds, loaded.info.fold_index).test;
  }
  if (indices.empty()) throw InvalidArgument("evaluate: no records to evaluate");
  const SampleStore store(manifest, loaded.info.image);
  const auto probs = predict_indices(*loaded.model, store, indices);
  std::vector<int> truth;
  for (auto i : indices) truth.push_back(static_cast<int>(index_of(store.label(i))));
  return evaluate_predictions(probs, truth);
}

}  // namespace lesionfuse
