#pragma once

// Run configuration: one INI-style text file with [scene], [camera],
// [dataset], [model], [train] and [ablation] sections of `key = value` lines.
// '#' starts a comment. Lists are comma-separated. Unknown sections or keys
// are errors that name the key and line.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amaa/camera.hpp"
#include "amaa/model.hpp"
#include "amaa/scene.hpp"
#include "amaa/train.hpp"

namespace amaa {

struct DatasetConfig {
  std::size_t train = 64;
  std::size_t val = 16;
  std::uint64_t seed = 42;
};

struct AblationConfig {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<double> alphas = kDefaultAlphas;
};

struct RunConfig {
  SceneSpec scene;
  CameraGrid camera;
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  AblationConfig ablation;

  /// Cross-section checks (scene extents vs grid, class counts, ...).
  void validate() const;
};

/// Parses config text; `origin` names the source in diagnostics.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");

/// Loads a config file, or the built-in defaults for the literal "default".
RunConfig load_config(const std::string& path_or_default);

/// Canonical text with every key; parse_config(config_text(c)) == c.
std::string config_text(const RunConfig& cfg);

/// The built-in defaults as config text (`--print-default-config`).
std::string default_config_text();

}  // namespace amaa
