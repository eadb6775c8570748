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

// Dataset manifest, clinical-metadata encoding, cross-validation folds and
// class weights.
//
// The clinical vector layout is frozen, since stored model heads depend on it:
//
//   index 0       age / age_scale
//   index 1..15   body region one-hot, in Region enum order
//   index 16..27  six boolean findings (itch, bleed, hurt, grew, changed,
//                 elevation), each as a 2-slot one-hot: false -> [1, 0],
//                 true -> [0, 1]

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lesionfuse {

enum class Diagnosis : std::uint8_t { ACK, BCC, MEL, NEV, SCC, SEK };

inline constexpr std::size_t kNumClasses = 6;
inline constexpr std::array<Diagnosis, kNumClasses> kAllDiagnoses = {
    Diagnosis::ACK, Diagnosis::BCC, Diagnosis::MEL,
    Diagnosis::NEV, Diagnosis::SCC, Diagnosis::SEK};

enum class Region : std::uint8_t {
  face, scalp, nose, lips, ears, neck, chest, abdomen,
  back, arm, forearm, hand, thigh, shin, foot
};

inline constexpr std::size_t kNumRegions = 15;

/// Upper-case display name ("ACK").
std::string_view display_name(Diagnosis d);
/// Lower-case manifest token ("ack").
std::string_view token(Diagnosis d);
std::string_view token(Region r);
std::optional<Diagnosis> parse_diagnosis(std::string_view token);
std::optional<Region> parse_region(std::string_view token);

inline constexpr std::size_t index_of(Diagnosis d) { return static_cast<std::size_t>(d); }
inline constexpr std::size_t index_of(Region r) { return static_cast<std::size_t>(r); }

struct ClinicalRecord {
  std::string lesion_id;
  std::string patient_id;
  std::string image_path;  // relative to the manifest root
  Diagnosis diagnosis = Diagnosis::ACK;
  int age = 0;
  Region region = Region::face;
  bool itch = false;
  bool bleed = false;
  bool hurt = false;
  bool grew = false;
  bool changed = false;
  bool elevation = false;

  /// The six boolean findings in encoding order.
  std::array<bool, 6> findings() const {
    return {itch, bleed, hurt, grew, changed, elevation};
  }
};

inline constexpr std::size_t kClinicalFeatures = 28;
inline constexpr std::size_t kAgeSlot = 0;
inline constexpr std::size_t kRegionSlot = 1;
inline constexpr std::size_t kFindingSlot = 16;
inline constexpr double kDefaultAgeScale = 100.0;

struct ClinicalVector {
  std::array<double, kClinicalFeatures> values{};

  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const ClinicalVector&) const = default;
};

ClinicalVector encode_clinical(const ClinicalRecord& record,
                               double age_scale = kDefaultAgeScale);

using LabelHistogram = std::array<std::size_t, kNumClasses>;

struct DatasetManifest {
  std::vector<ClinicalRecord> records;
  std::filesystem::path root;

  std::size_t size() const { return records.size(); }
  LabelHistogram label_histogram() const;
  LabelHistogram label_histogram(std::span<const std::size_t> indices) const;
  std::filesystem::path image_file(const ClinicalRecord& record) const {
    return root / record.image_path;
  }
};

inline constexpr std::string_view kManifestHeader =
    "lesion_id,patient_id,image_path,diagnosis,age,region,itch,bleed,hurt,grew,changed,elevation";

/// Parses manifest text. Rows are numbered from 1 (the header), so the first
/// record is row 2. Throws FormatError naming the row and column.
DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& root);

/// Reads a manifest file. `root` defaults to the file's directory. When
/// `check_images` is set, every image path must exist under the root.
DatasetManifest load_manifest(const std::filesystem::path& file,
                              std::optional<std::filesystem::path> root = std::nullopt,
                              bool check_images = true);

void write_manifest(std::ostream& out, const DatasetManifest& manifest);
void save_manifest(const std::filesystem::path& file, const DatasetManifest& manifest);

struct FoldAssignment {
  std::size_t k = 0;
  std::map<std::string, std::size_t> fold_of;

  /// Record indices (manifest order) belonging to `fold`.
  std::vector<std::size_t> members(const DatasetManifest& manifest, std::size_t fold) const;
  bool operator==(const FoldAssignment&) const = default;
};

FoldAssignment make_folds(const DatasetManifest& manifest, std::size_t k,
                          std::uint64_t seed, bool group_by_patient = true);

/// Train/validation/test record indices for one cross-validation round.
/// Test is fold `test_fold`, validation is fold (test_fold + 1) mod k and the
/// remaining folds train.
struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

FoldSplit split_for_fold(const DatasetManifest& manifest, const FoldAssignment& folds,
                         std::size_t test_fold);

void write_folds_csv(std::ostream& out, const DatasetManifest& manifest,
                     const FoldAssignment& folds);

/// Per-class loss weights w_i = N / n_i.
struct ClassWeights {
  std::array<double, kNumClasses> w{};

  double operator[](Diagnosis d) const { return w[index_of(d)]; }
};

/// w_i = N / n_i over an arbitrary list of class counts; every count must be
/// positive.
std::vector<double> weights_from_counts(std::span<const std::size_t> counts);

ClassWeights class_weights(const LabelHistogram& counts);
ClassWeights class_weights(const DatasetManifest& manifest);
ClassWeights class_weights(const DatasetManifest& manifest, std::span<const std::size_t> indices);

}  // namespace lesionfuse
