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

// Shared helpers for the unit tests.

#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <unistd.h>

#include "lesionfuse/data_model.hpp"
#include "lesionfuse/image.hpp"

namespace lftest {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lesionfuse-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline lesionfuse::ClinicalRecord record(std::string id, lesionfuse::Diagnosis d,
                                         std::string patient = "") {
  lesionfuse::ClinicalRecord r;
  r.lesion_id = id;
  r.patient_id = patient.empty() ? "p-" + id : patient;
  r.image_path = "images/" + id + ".png";
  r.diagnosis = d;
  r.age = 50;
  return r;
}

inline lesionfuse::ClinicalRecord random_record(std::mt19937_64& rng, int index = 0) {
  std::uniform_int_distribution<int> label(0, 5), region(0, 14), age(0, 110);
  std::bernoulli_distribution flag(0.5);
  auto r = record("r" + std::to_string(index), static_cast<lesionfuse::Diagnosis>(label(rng)));
  r.age = age(rng);
  r.region = static_cast<lesionfuse::Region>(region(rng));
  r.itch = flag(rng);
  r.bleed = flag(rng);
  r.hurt = flag(rng);
  r.grew = flag(rng);
  r.changed = flag(rng);
  r.elevation = flag(rng);
  return r;
}

inline lesionfuse::Image random_image(int h, int w, std::mt19937_64& rng, double lo = 0.0,
                                      double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  lesionfuse::Image img(h, w);
  for (auto& v : img.data) v = u(rng);
  return img;
}

/// Central difference of f with respect to x.
inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-6) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

}  // namespace lftest
