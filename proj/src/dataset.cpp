#include "amaa/dataset.hpp"

#include <cstdio>
#include <stdexcept>

#include <json.hpp>

#include "amaa/byte_io.hpp"
#include "amaa/rng.hpp"
#include "amaa/volume_file.hpp"

namespace amaa {
namespace {

using json = nlohmann::ordered_json;

json entries_json(const std::vector<ManifestEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    json o;
    o["rgb"] = e.rgb;
    o["labels"] = e.labels;
    o["seed"] = e.seed;
    arr.push_back(o);
  }
  return arr;
}

std::vector<ManifestEntry> entries_from(const json& arr, const char* split) {
  if (!arr.is_array()) {
    throw ConfigError(std::string("manifest field '") + split + "' must be an array");
  }
  std::vector<ManifestEntry> out;
  for (const auto& o : arr) {
    out.push_back({o.at("rgb").get<std::string>(), o.at("labels").get<std::string>(),
                   o.at("seed").get<std::uint64_t>()});
  }
  return out;
}

std::string scene_name(const char* split, std::size_t i, const char* kind) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04zu_%s.vvox", split, i, kind);
  return buf;
}

}  // namespace

std::string DatasetManifest::to_json() const {
  json j;
  j["version"] = 1;
  j["train"] = entries_json(train);
  j["val"] = entries_json(val);
  return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text,
                                           const std::filesystem::path& root) {
  json j;
  try {
    j = json::parse(text);
    if (j.at("version").get<int>() != 1) throw ConfigError("unsupported manifest version");
    DatasetManifest m;
    m.root = root;
    m.train = entries_from(j.at("train"), "train");
    m.val = entries_from(j.at("val"), "val");
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed dataset manifest: ") + e.what());
  }
}

std::vector<std::uint64_t> scene_seeds(std::uint64_t seed, std::size_t n_train,
                                       std::size_t n_val) {
  const std::uint64_t base = SplitMix64(seed).next();
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < n_train + n_val; ++i) out.push_back(base + i);
  return out;
}

SceneSample make_sample(const SceneSpec& spec, const CameraGrid& grid,
                        std::uint64_t scene_seed) {
  if (spec.extents != grid.dims) {
    throw ConfigError("scene extents must equal the camera grid dims");
  }
  SceneSample s;
  s.labels = generate_scene(spec, scene_seed);
  s.rgb = render_rgb(s.labels, grid, make_palette(spec.classes));
  s.seed = scene_seed;
  return s;
}

DatasetManifest make_dataset(const SceneSpec& spec, const CameraGrid& grid,
                             std::size_t n_train, std::size_t n_val,
                             std::uint64_t seed, const std::filesystem::path& dir) {
  if (n_train < 1 || n_val < 1) throw ConfigError("dataset needs n_train, n_val >= 1");
  spec.validate();
  grid.validate();
  const auto seeds = scene_seeds(seed, n_train, n_val);
  DatasetManifest m;
  m.root = dir;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const bool is_train = i < n_train;
    const char* split = is_train ? "train" : "val";
    const std::size_t local = is_train ? i : i - n_train;
    const SceneSample s = make_sample(spec, grid, seeds[i]);
    ManifestEntry e{scene_name(split, local, "rgb"), scene_name(split, local, "labels"),
                    seeds[i]};
    save_image(dir / e.rgb, s.rgb);
    save_labels(dir / e.labels, s.labels);
    (is_train ? m.train : m.val).push_back(e);
  }
  write_text_atomic(dir / "manifest.json", m.to_json());
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& manifest_path) {
  const auto bytes = read_file(manifest_path);
  return DatasetManifest::from_json(std::string(bytes.begin(), bytes.end()),
                                    manifest_path.parent_path());
}

std::vector<SceneSample> load_split(const DatasetManifest& manifest,
                                    const std::vector<ManifestEntry>& entries) {
  std::vector<SceneSample> out;
  for (const auto& e : entries) {
    out.push_back({load_image(manifest.root / e.rgb), load_labels(manifest.root / e.labels),
                   e.seed});
  }
  return out;
}

}  // namespace amaa
