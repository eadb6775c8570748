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

#include "lesionfuse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "lesionfuse/error.hpp"

namespace lesionfuse {

std::array<double, kNumClasses> reference_proportions() {
  const double total = static_cast<double>(
      std::accumulate(kReferenceCounts.begin(), kReferenceCounts.end(), std::size_t{0}));
  std::array<double, kNumClasses> p{};
  for (std::size_t c = 0; c < kNumClasses; ++c) p[c] = static_cast<double>(kReferenceCounts[c]) / total;
  return p;
}

void SyntheticConfig::validate() const {
  if (size == 0) throw InvalidArgument("synthetic: size must be positive");
  double sum = 0.0;
  for (double p : proportions) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("synthetic: proportions must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw InvalidArgument(fmt::format("synthetic: proportions sum to {}, expected 1", sum));
  if (*std::max_element(proportions.begin(), proportions.end()) >= 1.0)
    throw InvalidArgument("synthetic: degenerate proportions (a single class)");
  for (double v : {informativeness.image, informativeness.clinical})
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("synthetic: informativeness must lie in [0, 1]");
  if (render_images && image_side < 8) throw InvalidArgument("synthetic: image side must be at least 8");
}

nlohmann::json to_json(const SyntheticConfig& c) {
  return {{"size", c.size},
          {"proportions", c.proportions},
          {"informativeness", {{"image", c.informativeness.image}, {"clinical", c.informativeness.clinical}}},
          {"seed", c.seed},
          {"image_side", c.image_side},
          {"render_images", c.render_images}};
}

LabelHistogram allocate_counts(std::size_t size, const std::array<double, kNumClasses>& proportions) {
  LabelHistogram counts{};
  std::array<double, kNumClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double exact = proportions[c] * static_cast<double>(size);
    // Snap values a rounding error away from an integer.
    const double snapped = std::abs(exact - std::round(exact)) < 1e-9 ? std::round(exact) : exact;
    counts[c] = static_cast<std::size_t>(std::floor(snapped));
    remainder[c] = snapped - std::floor(snapped);
    assigned += counts[c];
  }
  std::array<std::size_t, kNumClasses> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < size; ++i, ++assigned) ++counts[order[i % kNumClasses]];
  return counts;
}

namespace {

struct Style {
  std::array<double, 3> color;
  double radius;       // fraction of the side
  double elongation;   // ratio of the ellipse axes
  double stripe_freq;  // texture cycles across the lesion
  double stripe_amp;
};

// Visual prototypes loosely following how each lesion type tends to look.
constexpr std::array<Style, kNumClasses> kStyles = {{
    {{0.78, 0.42, 0.38}, 0.30, 1.0, 0.0, 0.00},   // ACK: flat red scaly patch
    {{0.88, 0.70, 0.66}, 0.24, 1.0, 3.0, 0.10},   // BCC: pearly nodule
    {{0.18, 0.10, 0.09}, 0.36, 1.6, 1.5, 0.08},   // MEL: dark, irregular
    {{0.52, 0.34, 0.22}, 0.20, 1.0, 0.0, 0.00},   // NEV: small uniform brown
    {{0.66, 0.24, 0.20}, 0.32, 1.3, 5.0, 0.12},   // SCC: red, crusted
    {{0.58, 0.48, 0.30}, 0.34, 1.2, 7.0, 0.15},   // SEK: waxy, striated
}};

constexpr std::array<double, 3> kSkin = {0.92, 0.76, 0.66};

// Two body regions per diagnosis, disjoint across diagnoses.
constexpr std::array<std::array<Region, 2>, kNumClasses> kClassRegions = {{
    {Region::face, Region::forearm},
    {Region::nose, Region::back},
    {Region::chest, Region::shin},
    {Region::abdomen, Region::thigh},
    {Region::lips, Region::hand},
    {Region::neck, Region::scalp},
}};

// itch, bleed, hurt, grew, changed, elevation
constexpr std::array<std::array<double, 6>, kNumClasses> kFindingRates = {{
    {0.60, 0.20, 0.10, 0.20, 0.20, 0.50},
    {0.40, 0.60, 0.50, 0.60, 0.40, 0.70},
    {0.30, 0.40, 0.10, 0.70, 0.80, 0.40},
    {0.10, 0.10, 0.05, 0.20, 0.20, 0.30},
    {0.50, 0.60, 0.70, 0.60, 0.40, 0.70},
    {0.40, 0.10, 0.05, 0.30, 0.20, 0.60},
}};

constexpr std::array<double, kNumClasses> kAgeMean = {62.0, 64.0, 55.0, 35.0, 68.0, 60.0};

constexpr double kMarginalAgeMean = 57.0;
constexpr double kMarginalAgeStd = 15.0;
constexpr double kClassAgeStd = 10.0;
constexpr double kMarginalFindingRate = 0.35;

int draw_age(std::mt19937_64& rng, double mean, double sd) {
  std::normal_distribution<double> age(mean, sd);
  return static_cast<int>(std::clamp(std::round(age(rng)), 5.0, 100.0));
}

void fill_clinical(ClinicalRecord& r, bool informative, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  if (informative) {
    const auto c = index_of(r.diagnosis);
    r.age = draw_age(rng, kAgeMean[c], kClassAgeStd);
    r.region = kClassRegions[c][coin(rng) ? 1 : 0];
    std::array<bool, 6> f{};
    for (std::size_t i = 0; i < 6; ++i) f[i] = std::bernoulli_distribution(kFindingRates[c][i])(rng);
    std::tie(r.itch, r.bleed, r.hurt, r.grew, r.changed, r.elevation) =
        std::tuple(f[0], f[1], f[2], f[3], f[4], f[5]);
    return;
  }
  r.age = draw_age(rng, kMarginalAgeMean, kMarginalAgeStd);
  r.region = static_cast<Region>(std::uniform_int_distribution<int>(0, kNumRegions - 1)(rng));
  std::bernoulli_distribution flag(kMarginalFindingRate);
  r.itch = flag(rng);
  r.bleed = flag(rng);
  r.hurt = flag(rng);
  r.grew = flag(rng);
  r.changed = flag(rng);
  r.elevation = flag(rng);
}

}  // namespace

Image render_lesion(Diagnosis style, int side, std::mt19937_64& rng) {
  const Style& s = kStyles[index_of(style)];
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.03);
  const double n = static_cast<double>(side);
  const double cx = n * (0.5 + 0.1 * (unit(rng) - 0.5));
  const double cy = n * (0.5 + 0.1 * (unit(rng) - 0.5));
  const double radius = n * s.radius * (0.9 + 0.2 * unit(rng));
  const double angle = std::numbers::pi * unit(rng);
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  const double ca = std::cos(angle), sa = std::sin(angle);
  // Random illuminant cast, the nuisance color constancy removes.
  std::array<double, 3> cast{};
  for (auto& g : cast) g = 0.85 + 0.3 * unit(rng);

  Image img(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double u = (dx * ca + dy * sa) / (radius * s.elongation);
      const double v = (-dx * sa + dy * ca) / radius;
      const double d = std::sqrt(u * u + v * v);
      // Soft edge over about one pixel.
      const double inside = std::clamp((1.0 - d) * radius, 0.0, 1.0);
      const double texture = s.stripe_amp * std::sin(2.0 * std::numbers::pi * s.stripe_freq * u + phase);
      for (int c = 0; c < 3; ++c) {
        const double lesion = s.color[c] * (1.0 + texture);
        const double value = inside * lesion + (1.0 - inside) * kSkin[c];
        img.at(y, x, c) = std::clamp(value * cast[c] + noise(rng), 0.0, 1.0);
      }
    }
  }
  return img;
}

SyntheticDataset generate_synthetic(const SyntheticConfig& config,
                                    const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const auto counts = allocate_counts(config.size, config.proportions);
  std::vector<Diagnosis> labels;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    labels.insert(labels.end(), counts[c], static_cast<Diagnosis>(c));
  std::shuffle(labels.begin(), labels.end(), rng);

  SyntheticDataset out;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir / "images");
    out.manifest.root = *out_dir;
  }
  std::bernoulli_distribution image_informative(config.informativeness.image);
  std::bernoulli_distribution clinical_informative(config.informativeness.clinical);
  std::uniform_int_distribution<int> any_class(0, kNumClasses - 1);

  const int width = static_cast<int>(std::to_string(config.size).size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ClinicalRecord r;
    r.lesion_id = fmt::format("syn-{:0{}}", i + 1, width);
    r.patient_id = fmt::format("pat-{:0{}}", i + 1, width);
    r.image_path = fmt::format("images/{}.png", r.lesion_id);
    r.diagnosis = labels[i];
    // Independent streams keep each source's draws stable when the other
    // source's settings change.
    std::mt19937_64 clinical_rng(rng());
    std::mt19937_64 image_rng(rng());
    fill_clinical(r, clinical_informative(clinical_rng), clinical_rng);
    if (config.render_images) {
      const Diagnosis style =
          image_informative(image_rng) ? r.diagnosis : static_cast<Diagnosis>(any_class(image_rng));
      Image img = render_lesion(style, config.image_side, image_rng);
      if (out_dir) write_image(out.manifest.image_file(r), img);
      out.images.push_back(std::move(img));
    }
    out.manifest.records.push_back(std::move(r));
  }

  if (out_dir) {
    save_manifest(*out_dir / "manifest.csv", out.manifest);
    nlohmann::json marker = {{"synthetic", true},
                             {"note", "Artificial data generated by lesionfuse synth; not clinical data."},
                             {"config", to_json(config)},
                             {"histogram", counts}};
    std::ofstream(*out_dir / kSyntheticMarker) << marker.dump(2) << '\n';
  }
  return out;
}

bool is_synthetic_dataset(const std::filesystem::path& dir) {
  return std::filesystem::exists(dir / kSyntheticMarker);
}

}  // namespace lesionfuse
