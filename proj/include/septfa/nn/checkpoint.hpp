// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Checkpoint = JSON manifest (tensor name, shape, byte offset, dtype, plus a
// config echo) next to one raw little-endian blob. Model tensors are float32;
// optional training state tensors are float64 so that resuming is exact.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "septfa/core/error.hpp"
#include "septfa/nn/param_store.hpp"

namespace septfa::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct StoredTensor {
  std::string name;
  Shape shape;
  std::string dtype;  // "float32" | "float64"
  std::vector<double> values;
};

struct CheckpointData {
  nlohmann::json config;
  nlohmann::json extra;  // free-form (training state scalars etc.)
  std::vector<StoredTensor> tensors;

  const StoredTensor* find(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }
};

inline std::string blob_path_for(const std::string& manifest_path) {
  std::filesystem::path p(manifest_path);
  p.replace_extension(".bin");
  return p.string();
}

inline void write_checkpoint(const std::string& manifest_path, const CheckpointData& data) {
  const std::string blob_path = blob_path_for(manifest_path);
  nlohmann::json manifest;
  manifest["format"] = "septfa-checkpoint";
  manifest["version"] = 1;
  manifest["blob"] = std::filesystem::path(blob_path).filename().string();
  manifest["config"] = data.config;
  if (!data.extra.is_null()) manifest["extra"] = data.extra;
  std::vector<unsigned char> blob;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& t : data.tensors) {
    if (t.values.size() != t.shape.size()) throw DimensionError("checkpoint: tensor " + t.name + " has wrong size");
    entries.push_back({{"name", t.name},
                       {"shape", {t.shape.batch, t.shape.channels, t.shape.frames}},
                       {"offset", blob.size()},
                       {"dtype", t.dtype}});
    if (t.dtype == "float32") {
      for (double v : t.values) {
        const float f = static_cast<float>(v);
        unsigned char b[4];
        std::memcpy(b, &f, 4);
        blob.insert(blob.end(), b, b + 4);
      }
    } else if (t.dtype == "float64") {
      for (double v : t.values) {
        unsigned char b[8];
        std::memcpy(b, &v, 8);
        blob.insert(blob.end(), b, b + 8);
      }
    } else {
      throw ConfigError("checkpoint: unsupported dtype " + t.dtype);
    }
  }
  manifest["tensors"] = entries;
  {
    std::ofstream out(blob_path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint blob: " + blob_path);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  }
  std::ofstream out(manifest_path);
  if (!out) throw IoError("cannot write checkpoint manifest: " + manifest_path);
  out << manifest.dump(1) << "\n";
}

inline CheckpointData read_checkpoint(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open checkpoint manifest: " + manifest_path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest " + manifest_path + ": " + e.what());
  }
  if (manifest.value("format", "") != "septfa-checkpoint") throw IoError(manifest_path + ": not a septfa checkpoint");
  const auto blob_path =
      (std::filesystem::path(manifest_path).parent_path() / manifest.at("blob").get<std::string>()).string();
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw IoError("cannot open checkpoint blob: " + blob_path);
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  CheckpointData data;
  data.config = manifest.at("config");
  if (manifest.contains("extra")) data.extra = manifest["extra"];
  for (const auto& e : manifest.at("tensors")) {
    StoredTensor t;
    t.name = e.at("name");
    const auto& s = e.at("shape");
    t.shape = Shape{s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()};
    t.dtype = e.at("dtype");
    const std::size_t off = e.at("offset");
    const std::size_t width = t.dtype == "float32" ? 4 : t.dtype == "float64" ? 8 : 0;
    if (width == 0) throw IoError(manifest_path + ": unsupported dtype " + t.dtype);
    if (off + width * t.shape.size() > blob.size()) throw IoError(manifest_path + ": tensor " + t.name + " overruns blob");
    t.values.resize(t.shape.size());
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      if (width == 4) {
        float f;
        std::memcpy(&f, blob.data() + off + 4 * i, 4);
        t.values[i] = f;
      } else {
        std::memcpy(&t.values[i], blob.data() + off + 8 * i, 8);
      }
    }
    data.tensors.push_back(std::move(t));
  }
  return data;
}

/// Model tensors (float32) for every entry of `ps`.
inline void append_params(CheckpointData& data, const ParamStore& ps, const std::string& prefix = "",
                          const std::string& dtype = "float32") {
  for (const auto& e : ps.entries()) data.tensors.push_back({prefix + e.name, e.shape, dtype, e.values});
}

/// Fills `ps` from tensors named prefix + entry name; validates names, shapes
/// and the parameter census.
inline void load_params(const CheckpointData& data, ParamStore& ps, const std::string& prefix = "") {
  std::size_t loaded = 0;
  for (std::size_t i = 0; i < ps.count(); ++i) {
    auto& e = ps.entry(static_cast<int>(i));
    const StoredTensor* t = data.find(prefix + e.name);
    if (!t) throw ConfigError("checkpoint is missing parameter " + prefix + e.name);
    if (!(t->shape == e.shape)) {
      throw ConfigError("checkpoint parameter " + e.name + " has shape " + t->shape.str() + ", model expects " + e.shape.str());
    }
    e.values = t->values;
    loaded += t->values.size();
  }
  if (loaded != ps.census()) throw ConfigError("checkpoint parameter census mismatch");
}

}  // namespace septfa::nn
