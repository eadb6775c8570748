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

// Strict reading of JSON objects into config structs.

#pragma once

#include <set>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lesionfuse/error.hpp"

namespace lesionfuse::detail {

/// Copies present keys into fields and rejects keys nobody asked for.
class JsonReader {
 public:
  JsonReader(const nlohmann::json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw FormatError(fmt::format("{}: expected an object", context_));
  }

  template <typename T>
  JsonReader& get(const char* key, T& field) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end() && !it->is_null()) {
      try {
        field = it->template get<T>();
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(fmt::format("{}: bad value for '{}': {}", context_, key, e.what()));
      }
    }
    return *this;
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const nlohmann::json& at(const char* key) const { return j_.at(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key()))
        throw FormatError(fmt::format("{}: unknown key '{}'", context_, it.key()));
  }

 private:
  const nlohmann::json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace lesionfuse::detail
