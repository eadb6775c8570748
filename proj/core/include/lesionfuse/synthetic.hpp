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

// Synthetic lesion datasets with controllable label signal per source.
// Output is artificial and is labelled as such wherever it is written.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "lesionfuse/data_model.hpp"
#include "lesionfuse/image.hpp"

namespace lesionfuse {

/// Per-diagnosis sample counts of the reference smartphone dataset.
inline constexpr LabelHistogram kReferenceCounts = {543, 442, 67, 196, 149, 215};

std::array<double, kNumClasses> reference_proportions();

/// Probability that a sample's image / clinical fields follow its true class
/// rather than an uninformative draw.
struct Informativeness {
  double image = 0.5;
  double clinical = 0.5;
};

struct SyntheticConfig {
  std::size_t size = 600;
  std::array<double, kNumClasses> proportions = reference_proportions();
  Informativeness informativeness;
  std::uint64_t seed = 0;
  int image_side = 32;
  /// Render images; metadata-only datasets skip them.
  bool render_images = true;

  void validate() const;
};

nlohmann::json to_json(const SyntheticConfig& config);

/// Largest-remainder allocation of `size` samples to the proportions.
LabelHistogram allocate_counts(std::size_t size, const std::array<double, kNumClasses>& proportions);

struct SyntheticDataset {
  DatasetManifest manifest;
  /// One per record when rendered; empty otherwise.
  std::vector<Image> images;
};

/// Deterministic for a given config. With `out_dir`, writes images/,
/// manifest.csv and the synthetic.json marker there.
SyntheticDataset generate_synthetic(const SyntheticConfig& config,
                                    const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Draws a lesion image in the visual style of `style`.
Image render_lesion(Diagnosis style, int side, std::mt19937_64& rng);

inline constexpr const char* kSyntheticMarker = "synthetic.json";

/// True when the directory carries the synthetic-data marker.
bool is_synthetic_dataset(const std::filesystem::path& dir);

}  // namespace lesionfuse
