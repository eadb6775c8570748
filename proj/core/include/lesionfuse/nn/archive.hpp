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

// Tensor archive: the on-disk container for pretrained weights and training
// checkpoints.
//
//   bytes 0..3   magic "LFTA"
//   bytes 4..7   format version (uint32, little-endian), currently 1
//   bytes 8..15  header length H (uint64, little-endian)
//   next H bytes UTF-8 JSON header:
//                  {"meta": {...}, "tensors": [{"name", "shape", "offset"}]}
//                offsets count float64 elements from the start of the payload
//   remainder    payload of little-endian IEEE-754 float64 values

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "lesionfuse/nn/layers.hpp"

namespace lesionfuse::nn {

struct TensorArchive {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;
};

/// Writes to a temporary sibling and renames it into place.
void save_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive load_archive(const std::filesystem::path& path);

/// Copies every named parameter into an archive.
void store_parameters(const ParameterList& params, TensorArchive& archive,
                      const std::string& prefix = "");

/// Assigns archive tensors to matching parameters. Every parameter must be
/// present with the same shape unless `allow_missing` is set; extra archive
/// entries are ignored. Returns the number of parameters assigned.
std::size_t restore_parameters(const ParameterList& params, const TensorArchive& archive,
                               const std::string& prefix = "", bool allow_missing = false);

}  // namespace lesionfuse::nn
