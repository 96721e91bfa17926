// Copyright 2026 The press2dyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "press2dyn/diffgraph/graph.hpp"
#include "press2dyn/errors.hpp"

// Weight files: a JSON manifest (names, shapes, dtype, offsets plus caller
// metadata) next to a raw little-endian f64 blob holding every tensor in
// manifest order.
namespace press2dyn::diff {

static_assert(std::endian::native == std::endian::little, "weight blobs assume a little-endian host");

inline constexpr const char* kWeightsFormat = "press2dyn.weights";

inline void save_weights(const ParamStore& store, const std::filesystem::path& manifest_path,
                         const nlohmann::json& metadata = nlohmann::json::object()) {
  auto blob_path = manifest_path;
  blob_path.replace_extension(".bin");
  nlohmann::json tensors = nlohmann::json::array();
  std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
  if (!blob) throw DataError("cannot write " + blob_path.string());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < store.size(); ++k) {
    const Parameter& p = store[k];
    tensors.push_back({{"name", p.name},
                       {"shape", p.value.shape()},
                       {"trainable", p.trainable},
                       {"offset", offset}});
    blob.write(reinterpret_cast<const char*>(p.value.data()),
               static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    offset += p.value.size();
  }
  if (!blob) throw DataError("failed writing " + blob_path.string());
  nlohmann::json manifest = {{"format", kWeightsFormat},
                             {"version", 1},
                             {"dtype", "f64"},
                             {"endianness", "little"},
                             {"blob", blob_path.filename().string()},
                             {"count", offset},
                             {"tensors", tensors},
                             {"metadata", metadata}};
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';
}

inline nlohmann::json read_weights_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kWeightsFormat || manifest.value("dtype", "") != "f64")
    throw DataError(manifest_path.string() + ": not a press2dyn f64 weight manifest");
  return manifest;
}

// Loads values into an already-built store; names and shapes must match.
inline void load_weights(ParamStore& store, const std::filesystem::path& manifest_path) {
  const nlohmann::json manifest = read_weights_manifest(manifest_path);
  const auto blob_path = manifest_path.parent_path() / manifest.at("blob").get<std::string>();
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw DataError("cannot open " + blob_path.string());
  std::vector<double> values(manifest.at("count").get<std::size_t>());
  blob.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (blob.gcount() != static_cast<std::streamsize>(values.size() * sizeof(double)))
    throw DataError(blob_path.string() + ": truncated weight blob");
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != store.size())
    throw DataError(manifest_path.string() + ": tensor count does not match model");
  for (const auto& t : tensors) {
    const auto name = t.at("name").get<std::string>();
    if (!store.contains(name)) throw DataError(manifest_path.string() + ": unknown tensor " + name);
    Parameter& p = store.get(name);
    const auto shape = t.at("shape").get<Shape>();
    if (shape != p.value.shape())
      throw DataError(manifest_path.string() + ": shape mismatch for " + name);
    const auto offset = t.at("offset").get<std::size_t>();
    if (offset + p.value.size() > values.size())
      throw DataError(manifest_path.string() + ": offset out of range for " + name);
    std::memcpy(p.value.data(), values.data() + offset, p.value.size() * sizeof(double));
  }
}

}  // namespace press2dyn::diff
