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

#include "lesionfuse/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "lesionfuse/error.hpp"

namespace lesionfuse {
namespace {

constexpr std::array<std::string_view, kNumClasses> kDiagnosisNames = {
    "ACK", "BCC", "MEL", "NEV", "SCC", "SEK"};
constexpr std::array<std::string_view, kNumClasses> kDiagnosisTokens = {
    "ack", "bcc", "mel", "nev", "scc", "sek"};
constexpr std::array<std::string_view, kNumRegions> kRegionTokens = {
    "face", "scalp", "nose", "lips", "ears", "neck", "chest", "abdomen",
    "back", "arm", "forearm", "hand", "thigh", "shin", "foot"};
constexpr std::array<std::string_view, 12> kColumns = {
    "lesion_id", "patient_id", "image_path", "diagnosis", "age", "region",
    "itch", "bleed", "hurt", "grew", "changed", "elevation"};

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

[[noreturn]] void row_error(std::size_t row, std::string_view column, const std::string& what) {
  throw FormatError(fmt::format("manifest: {} (row {}, column {})", what, row, column));
}

bool parse_bool(std::string_view s, std::size_t row, std::string_view column) {
  if (s == "true") return true;
  if (s == "false") return false;
  row_error(row, column, fmt::format("non-boolean flag '{}'", s));
}

}  // namespace

std::string_view display_name(Diagnosis d) { return kDiagnosisNames[index_of(d)]; }
std::string_view token(Diagnosis d) { return kDiagnosisTokens[index_of(d)]; }
std::string_view token(Region r) { return kRegionTokens[index_of(r)]; }

std::optional<Diagnosis> parse_diagnosis(std::string_view t) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (kDiagnosisTokens[i] == t) return static_cast<Diagnosis>(i);
  return std::nullopt;
}

std::optional<Region> parse_region(std::string_view t) {
  for (std::size_t i = 0; i < kNumRegions; ++i)
    if (kRegionTokens[i] == t) return static_cast<Region>(i);
  return std::nullopt;
}

ClinicalVector encode_clinical(const ClinicalRecord& record, double age_scale) {
  if (!(age_scale > 0.0)) throw InvalidArgument("encode_clinical: age_scale must be positive");
  ClinicalVector v;
  v.values[kAgeSlot] = static_cast<double>(record.age) / age_scale;
  v.values[kRegionSlot + index_of(record.region)] = 1.0;
  const auto flags = record.findings();
  for (std::size_t i = 0; i < flags.size(); ++i)
    v.values[kFindingSlot + 2 * i + (flags[i] ? 1 : 0)] = 1.0;
  return v;
}

LabelHistogram DatasetManifest::label_histogram() const {
  LabelHistogram h{};
  for (const auto& r : records) ++h[index_of(r.diagnosis)];
  return h;
}

LabelHistogram DatasetManifest::label_histogram(std::span<const std::size_t> indices) const {
  LabelHistogram h{};
  for (auto i : indices) ++h[index_of(records.at(i).diagnosis)];
  return h;
}

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& root) {
  DatasetManifest manifest;
  manifest.root = root;
  std::string line;
  std::size_t row = 0;
  bool seen_header = false;
  std::set<std::string, std::less<>> ids;

  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (!seen_header) {
      if (line != kManifestHeader)
        throw FormatError(fmt::format("manifest: row 1 must be the header '{}'", kManifestHeader));
      seen_header = true;
      continue;
    }
    if (line.empty()) continue;

    const auto cells = split_commas(line);
    if (cells.size() != kColumns.size())
      row_error(row, "*", fmt::format("expected {} columns, found {}", kColumns.size(), cells.size()));

    ClinicalRecord r;
    r.lesion_id = std::string(cells[0]);
    r.patient_id = std::string(cells[1]);
    r.image_path = std::string(cells[2]);
    if (r.lesion_id.empty()) row_error(row, kColumns[0], "empty lesion_id");
    if (r.patient_id.empty()) row_error(row, kColumns[1], "empty patient_id");
    if (r.image_path.empty()) row_error(row, kColumns[2], "empty image_path");

    const auto diag = parse_diagnosis(cells[3]);
    if (!diag) row_error(row, kColumns[3], fmt::format("unknown label '{}'", cells[3]));
    r.diagnosis = *diag;

    const auto age_text = cells[4];
    const auto* end = age_text.data() + age_text.size();
    auto [ptr, ec] = std::from_chars(age_text.data(), end, r.age);
    if (ec != std::errc{} || ptr != end || age_text.empty())
      row_error(row, kColumns[4], fmt::format("non-integer age '{}'", age_text));
    if (r.age < 0) row_error(row, kColumns[4], "negative age");

    const auto region = parse_region(cells[5]);
    if (!region) row_error(row, kColumns[5], fmt::format("unknown region '{}'", cells[5]));
    r.region = *region;

    r.itch = parse_bool(cells[6], row, kColumns[6]);
    r.bleed = parse_bool(cells[7], row, kColumns[7]);
    r.hurt = parse_bool(cells[8], row, kColumns[8]);
    r.grew = parse_bool(cells[9], row, kColumns[9]);
    r.changed = parse_bool(cells[10], row, kColumns[10]);
    r.elevation = parse_bool(cells[11], row, kColumns[11]);

    if (!ids.insert(r.lesion_id).second)
      row_error(row, kColumns[0], fmt::format("duplicate lesion_id '{}'", r.lesion_id));
    manifest.records.push_back(std::move(r));
  }
  if (!seen_header) throw FormatError("manifest: missing header row");
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& file,
                              std::optional<std::filesystem::path> root, bool check_images) {
  std::ifstream in(file);
  if (!in) throw Error(fmt::format("cannot open manifest '{}'", file.string()));
  auto base = root ? *root : file.parent_path();
  auto manifest = parse_manifest(in, base);
  if (check_images) {
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
      const auto path = manifest.image_file(manifest.records[i]);
      if (!std::filesystem::exists(path))
        row_error(i + 2, "image_path", fmt::format("image '{}' not found", path.string()));
    }
  }
  return manifest;
}

void write_manifest(std::ostream& out, const DatasetManifest& manifest) {
  auto b = [](bool v) { return v ? "true" : "false"; };
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.records) {
    out << r.lesion_id << ',' << r.patient_id << ',' << r.image_path << ','
        << token(r.diagnosis) << ',' << r.age << ',' << token(r.region) << ','
        << b(r.itch) << ',' << b(r.bleed) << ',' << b(r.hurt) << ',' << b(r.grew) << ','
        << b(r.changed) << ',' << b(r.elevation) << '\n';
  }
}

void save_manifest(const std::filesystem::path& file, const DatasetManifest& manifest) {
  std::ofstream out(file);
  if (!out) throw Error(fmt::format("cannot write manifest '{}'", file.string()));
  write_manifest(out, manifest);
}

std::vector<std::size_t> FoldAssignment::members(const DatasetManifest& manifest,
                                                 std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    auto it = fold_of.find(manifest.records[i].lesion_id);
    if (it == fold_of.end())
      throw InvalidArgument(fmt::format("lesion '{}' has no fold", manifest.records[i].lesion_id));
    if (it->second == fold) out.push_back(i);
  }
  return out;
}

namespace {

// Round-robin dealing of shuffled per-class index lists. The dealing cursor
// carries over between classes so fold sizes differ by at most one.
FoldAssignment stratified_folds(const DatasetManifest& manifest, std::size_t k,
                                std::mt19937_64& rng) {
  FoldAssignment folds;
  folds.k = k;
  std::size_t cursor = 0;
  for (auto d : kAllDiagnoses) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
      if (manifest.records[i].diagnosis == d) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (auto i : idx) {
      folds.fold_of[manifest.records[i].lesion_id] = cursor % k;
      ++cursor;
    }
  }
  return folds;
}

// Greedy placement of whole patient groups, largest first, into the fold that
// least increases the squared deviation from the ideal per-class and total
// counts.
FoldAssignment grouped_folds(const DatasetManifest& manifest, std::size_t k,
                             std::mt19937_64& rng) {
  std::unordered_map<std::string, std::size_t> group_index;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    auto [it, inserted] = group_index.try_emplace(manifest.records[i].patient_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  if (groups.size() < k)
    throw InvalidArgument(fmt::format("make_folds: {} patient groups cannot fill {} folds",
                                      groups.size(), k));

  std::shuffle(groups.begin(), groups.end(), rng);
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });

  const auto total = manifest.label_histogram();
  const double n = static_cast<double>(manifest.records.size());
  std::vector<std::array<double, kNumClasses>> counts(k, std::array<double, kNumClasses>{});
  std::vector<double> sizes(k, 0.0);

  FoldAssignment folds;
  folds.k = k;
  for (const auto& g : groups) {
    std::array<double, kNumClasses> gc{};
    for (auto i : g) gc[index_of(manifest.records[i].diagnosis)] += 1.0;
    const double gs = static_cast<double>(g.size());

    std::size_t best = 0;
    double best_cost = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      double cost = 0.0;
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double ideal = static_cast<double>(total[c]) / static_cast<double>(k);
        const double before = counts[f][c] - ideal;
        const double after = counts[f][c] + gc[c] - ideal;
        cost += after * after - before * before;
      }
      const double ideal_size = n / static_cast<double>(k);
      const double sb = sizes[f] - ideal_size;
      const double sa = sizes[f] + gs - ideal_size;
      cost += sa * sa - sb * sb;
      if (f == 0 || cost < best_cost - 1e-12) {
        best = f;
        best_cost = cost;
      }
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) counts[best][c] += gc[c];
    sizes[best] += gs;
    for (auto i : g) folds.fold_of[manifest.records[i].lesion_id] = best;
  }
  for (std::size_t f = 0; f < k; ++f)
    if (sizes[f] == 0.0)
      throw InvalidArgument(fmt::format("make_folds: fold {} is empty after grouping", f));
  return folds;
}

}  // namespace

FoldAssignment make_folds(const DatasetManifest& manifest, std::size_t k, std::uint64_t seed,
                          bool group_by_patient) {
  if (k < 2) throw InvalidArgument("make_folds: k must be at least 2");
  if (k > manifest.records.size())
    throw InvalidArgument(fmt::format("make_folds: k = {} exceeds the {} records", k,
                                      manifest.records.size()));
  std::mt19937_64 rng(seed);
  return group_by_patient ? grouped_folds(manifest, k, rng) : stratified_folds(manifest, k, rng);
}

FoldSplit split_for_fold(const DatasetManifest& manifest, const FoldAssignment& folds,
                         std::size_t test_fold) {
  if (test_fold >= folds.k)
    throw InvalidArgument(fmt::format("fold index {} out of range [0, {})", test_fold, folds.k));
  const std::size_t val_fold = (test_fold + 1) % folds.k;
  FoldSplit split;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto f = folds.fold_of.at(manifest.records[i].lesion_id);
    if (f == test_fold)
      split.test.push_back(i);
    else if (f == val_fold)
      split.validation.push_back(i);
    else
      split.train.push_back(i);
  }
  return split;
}

void write_folds_csv(std::ostream& out, const DatasetManifest& manifest,
                     const FoldAssignment& folds) {
  out << "lesion_id,fold\n";
  for (const auto& r : manifest.records) out << r.lesion_id << ',' << folds.fold_of.at(r.lesion_id) << '\n';
}

std::vector<double> weights_from_counts(std::span<const std::size_t> counts) {
  const auto total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  std::vector<double> w;
  w.reserve(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0)
      throw InvalidArgument(fmt::format("class_weights: class {} is absent, weight undefined", c));
    w.push_back(static_cast<double>(total) / static_cast<double>(counts[c]));
  }
  return w;
}

ClassWeights class_weights(const LabelHistogram& counts) {
  const auto total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  ClassWeights weights;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] == 0)
      throw InvalidArgument(fmt::format("class_weights: class {} is absent, weight undefined",
                                        kDiagnosisNames[c]));
    weights.w[c] = static_cast<double>(total) / static_cast<double>(counts[c]);
  }
  return weights;
}

ClassWeights class_weights(const DatasetManifest& manifest) {
  return class_weights(manifest.label_histogram());
}

ClassWeights class_weights(const DatasetManifest& manifest, std::span<const std::size_t> indices) {
  return class_weights(manifest.label_histogram(indices));
}

}  // namespace lesionfuse
