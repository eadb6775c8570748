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

#include "lesionfuse/nn/archive.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "lesionfuse/error.hpp"

namespace lesionfuse::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "archive IO assumes little-endian");

constexpr char kMagic[4] = {'L', 'F', 'T', 'A'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  nlohmann::json header;
  header["meta"] = archive.meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.size();
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write archive '{}'", tmp.string()));
    const std::uint64_t len = text.size();
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : archive.tensors)
      out.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!out) throw Error(fmt::format("short write to '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

TensorArchive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open archive '{}'", path.string()));
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(fmt::format("'{}' is not a tensor archive", path.string()));
  if (version != kVersion)
    throw FormatError(fmt::format("'{}': unsupported archive version {}", path.string(), version));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError(fmt::format("'{}': truncated header", path.string()));

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("'{}': bad header: {}", path.string(), e.what()));
  }
  TensorArchive archive;
  archive.meta = header.value("meta", nlohmann::json::object());
  const auto payload_start = in.tellg();
  for (const auto& entry : header.at("tensors")) {
    Tensor t(entry.at("shape").get<Shape>());
    const auto offset = entry.at("offset").get<std::uint64_t>();
    in.seekg(payload_start + static_cast<std::streamoff>(offset * sizeof(double)));
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw FormatError(fmt::format("'{}': truncated payload", path.string()));
    archive.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return archive;
}

void store_parameters(const ParameterList& params, TensorArchive& archive,
                      const std::string& prefix) {
  for (const auto& [name, p] : params) archive.tensors[prefix + name] = p->value;
}

std::size_t restore_parameters(const ParameterList& params, const TensorArchive& archive,
                               const std::string& prefix, bool allow_missing) {
  std::size_t assigned = 0;
  for (const auto& [name, p] : params) {
    auto it = archive.tensors.find(prefix + name);
    if (it == archive.tensors.end()) {
      if (allow_missing) continue;
      throw FormatError(fmt::format("archive is missing tensor '{}'", prefix + name));
    }
    if (it->second.shape != p->value.shape)
      throw FormatError(fmt::format("tensor '{}' has shape {}, expected {}", prefix + name,
                                    shape_string(it->second.shape), shape_string(p->value.shape)));
    p->value = it->second;
    ++assigned;
  }
  return assigned;
}

}  // namespace lesionfuse::nn
