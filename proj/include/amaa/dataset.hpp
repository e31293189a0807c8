#pragma once

// Synthetic dataset on disk: one RGB image and one label volume per scene,
// plus a JSON manifest
//   {"version":1,"train":[{"rgb":path,"labels":path,"seed":n}],"val":[...]}
// with paths relative to the manifest's directory.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amaa/camera.hpp"
#include "amaa/scene.hpp"

namespace amaa {

struct ManifestEntry {
  std::string rgb;
  std::string labels;
  std::uint64_t seed = 0;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::filesystem::path root;  // directory holding manifest.json
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> val;

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text,
                                   const std::filesystem::path& root);
};

struct SceneSample {
  Tensor rgb;  // (3, rows, cols)
  LabelVolume labels;
  std::uint64_t seed = 0;
};

/// Per-scene seeds: base = SplitMix64(seed).next(); train scene i uses
/// base + i and val scene j uses base + n_train + j, so the splits never share
/// a seed.
std::vector<std::uint64_t> scene_seeds(std::uint64_t seed, std::size_t n_train,
                                       std::size_t n_val);

SceneSample make_sample(const SceneSpec& spec, const CameraGrid& grid,
                        std::uint64_t scene_seed);

/// Generates, renders and writes every scene plus manifest.json into `dir`.
DatasetManifest make_dataset(const SceneSpec& spec, const CameraGrid& grid,
                             std::size_t n_train, std::size_t n_val,
                             std::uint64_t seed, const std::filesystem::path& dir);

DatasetManifest load_manifest(const std::filesystem::path& manifest_path);
std::vector<SceneSample> load_split(const DatasetManifest& manifest,
                                    const std::vector<ManifestEntry>& entries);

}  // namespace amaa
