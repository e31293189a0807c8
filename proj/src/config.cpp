#include "amaa/config.hpp"

#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "amaa/byte_io.hpp"
#include "amaa/metrics.hpp"

namespace amaa {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

// Parse failures throw std::invalid_argument; the caller adds key and line.
double to_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(to_u64(s)); }

bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& s, F convert) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) out.push_back(convert(item));
  return out;
}

template <std::size_t N>
std::array<double, N> to_array(const std::string& s) {
  const auto v = to_list<double>(s, to_double);
  if (v.size() != N) {
    throw std::invalid_argument("expected " + std::to_string(N) + " numbers, got " +
                                std::to_string(v.size()));
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = v[i];
  return out;
}

std::string fmt(double v) { return format_double(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename C>
std::string join(const C& c) {
  std::string s;
  for (const auto& v : c) s += (s.empty() ? "" : ", ") + fmt(v);
  return s;
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define AMAA_SIZE(sec, k, expr)                                                  \
  Field {                                                                        \
    sec, #k, [](RunConfig& c, const std::string& v) { expr = to_size(v); },      \
        [](const RunConfig& c) { return fmt(std::uint64_t{expr}); }              \
  }
#define AMAA_U64(sec, k, expr)                                                   \
  Field {                                                                        \
    sec, #k, [](RunConfig& c, const std::string& v) { expr = to_u64(v); },       \
        [](const RunConfig& c) { return fmt(std::uint64_t{expr}); }              \
  }
#define AMAA_DOUBLE(sec, k, expr)                                                \
  Field {                                                                        \
    sec, #k, [](RunConfig& c, const std::string& v) { expr = to_double(v); },    \
        [](const RunConfig& c) { return fmt(double{expr}); }                     \
  }
#define AMAA_BOOL(sec, k, expr)                                                  \
  Field {                                                                        \
    sec, #k, [](RunConfig& c, const std::string& v) { expr = to_bool(v); },      \
        [](const RunConfig& c) { return fmt(bool{expr}); }                       \
  }

template <typename E>
struct EnumNames {
  std::vector<std::pair<E, const char*>> names;
  E parse(const std::string& v) const {
    std::string options;
    for (const auto& [e, n] : names) {
      if (v == n) return e;
      options += (options.empty() ? "" : ", ") + std::string(n);
    }
    throw std::invalid_argument("expected one of {" + options + "}, got '" + v + "'");
  }
  std::string name(E e) const {
    for (const auto& [x, n] : names) {
      if (x == e) return n;
    }
    return "?";
  }
};

const EnumNames<SimamChannelMode> kSimamModes{
    {{SimamChannelMode::kChannelMean, "channel_mean"},
     {SimamChannelMode::kPerChannel, "per_channel"}}};
const EnumNames<Sampling> kSamplings{
    {{Sampling::kNearest, "nearest"}, {Sampling::kBilinear, "bilinear"}}};
const EnumNames<ops::UpsampleMode> kUpsamples{
    {{ops::UpsampleMode::kNearest, "nearest"}, {ops::UpsampleMode::kTrilinear, "trilinear"}}};

std::optional<SkipFusion> parse_skip(const std::string& v) {
  if (v == "auto") return std::nullopt;
  if (v == "gated") return SkipFusion::kGated;
  if (v == "sum") return SkipFusion::kSum;
  if (v == "none") return SkipFusion::kNone;
  throw std::invalid_argument("expected one of {auto, gated, sum, none}, got '" + v + "'");
}

std::string skip_name(const std::optional<SkipFusion>& s) {
  if (!s) return "auto";
  switch (*s) {
    case SkipFusion::kGated: return "gated";
    case SkipFusion::kSum: return "sum";
    case SkipFusion::kNone: return "none";
  }
  return "auto";
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      AMAA_SIZE("scene", classes, c.scene.classes),
      AMAA_SIZE("scene", objects_min, c.scene.objects_min),
      AMAA_SIZE("scene", objects_max, c.scene.objects_max),
      AMAA_SIZE("scene", object_size_min, c.scene.object_size_min),
      AMAA_SIZE("scene", object_size_max, c.scene.object_size_max),

      AMAA_DOUBLE("camera", fx, c.camera.fx),
      AMAA_DOUBLE("camera", fy, c.camera.fy),
      AMAA_DOUBLE("camera", cx, c.camera.cx),
      AMAA_DOUBLE("camera", cy, c.camera.cy),
      AMAA_SIZE("camera", image_rows, c.camera.image_rows),
      AMAA_SIZE("camera", image_cols, c.camera.image_cols),
      Field{"camera", "origin",
            [](RunConfig& c, const std::string& v) { c.camera.origin = to_array<3>(v); },
            [](const RunConfig& c) { return join(c.camera.origin); }},
      AMAA_DOUBLE("camera", voxel_size, c.camera.voxel_size),
      Field{"camera", "grid",
            [](RunConfig& c, const std::string& v) {
              const auto d = to_list<std::size_t>(v, to_size);
              if (d.size() != 3) throw std::invalid_argument("expected D, H, W");
              c.camera.dims = {d[0], d[1], d[2]};
            },
            [](const RunConfig& c) {
              return join(std::vector<std::uint64_t>{c.camera.dims.depth, c.camera.dims.height,
                                                     c.camera.dims.width});
            }},
      Field{"camera", "rotation",
            [](RunConfig& c, const std::string& v) { c.camera.pose.rotation = to_array<9>(v); },
            [](const RunConfig& c) { return join(c.camera.pose.rotation); }},
      Field{"camera", "translation",
            [](RunConfig& c, const std::string& v) {
              c.camera.pose.translation = to_array<3>(v);
            },
            [](const RunConfig& c) { return join(c.camera.pose.translation); }},

      AMAA_SIZE("dataset", train, c.dataset.train),
      AMAA_SIZE("dataset", val, c.dataset.val),
      AMAA_U64("dataset", seed, c.dataset.seed),

      AMAA_BOOL("model", use_se, c.model.use_se),
      AMAA_BOOL("model", use_simam, c.model.use_simam),
      AMAA_BOOL("model", use_afg, c.model.use_afg),
      AMAA_DOUBLE("model", alpha, c.model.alpha),
      Field{"model", "widths_2d",
            [](RunConfig& c, const std::string& v) {
              c.model.widths_2d = to_list<std::size_t>(v, to_size);
            },
            [](const RunConfig& c) {
              return join(std::vector<std::uint64_t>(c.model.widths_2d.begin(),
                                                     c.model.widths_2d.end()));
            }},
      Field{"model", "scale_levels",
            [](RunConfig& c, const std::string& v) {
              c.model.scale_levels = to_list<std::size_t>(v, to_size);
            },
            [](const RunConfig& c) {
              return join(std::vector<std::uint64_t>(c.model.scale_levels.begin(),
                                                     c.model.scale_levels.end()));
            }},
      AMAA_SIZE("model", se_ratio, c.model.se_ratio),
      AMAA_DOUBLE("model", simam_lambda, c.model.simam.lambda),
      AMAA_SIZE("model", simam_window, c.model.simam.window),
      Field{"model", "simam_mode",
            [](RunConfig& c, const std::string& v) { c.model.simam.mode = kSimamModes.parse(v); },
            [](const RunConfig& c) { return kSimamModes.name(c.model.simam.mode); }},
      Field{"model", "sampling",
            [](RunConfig& c, const std::string& v) { c.model.sampling = kSamplings.parse(v); },
            [](const RunConfig& c) { return kSamplings.name(c.model.sampling); }},
      Field{"model", "upsample",
            [](RunConfig& c, const std::string& v) { c.model.upsample = kUpsamples.parse(v); },
            [](const RunConfig& c) { return kUpsamples.name(c.model.upsample); }},
      Field{"model", "skip",
            [](RunConfig& c, const std::string& v) { c.model.skip = parse_skip(v); },
            [](const RunConfig& c) { return skip_name(c.model.skip); }},
      Field{"model", "class_weights",
            [](RunConfig& c, const std::string& v) {
              c.model.loss.class_weights =
                  v == "auto" ? std::vector<double>{} : to_list<double>(v, to_double);
            },
            [](const RunConfig& c) {
              return c.model.loss.class_weights.empty() ? std::string("auto")
                                                        : join(c.model.loss.class_weights);
            }},
      AMAA_DOUBLE("model", lambda_c, c.model.loss.lambda_c),
      AMAA_SIZE("model", consistency_window, c.model.loss.consistency_window),
      AMAA_BOOL("model", affinity, c.model.loss.use_affinity),
      AMAA_U64("model", seed, c.model.seed),

      AMAA_DOUBLE("train", lr, c.train.lr),
      AMAA_DOUBLE("train", weight_decay, c.train.weight_decay),
      AMAA_DOUBLE("train", beta1, c.train.beta1),
      AMAA_DOUBLE("train", beta2, c.train.beta2),
      AMAA_DOUBLE("train", eps, c.train.eps),
      AMAA_SIZE("train", epochs, c.train.epochs),
      AMAA_SIZE("train", batch_size, c.train.batch_size),
      AMAA_DOUBLE("train", decay_power, c.train.decay_power),
      AMAA_DOUBLE("train", clip_norm, c.train.clip_norm),
      AMAA_U64("train", seed, c.train.seed),
      AMAA_BOOL("train", flip, c.train.flip),

      Field{"ablation", "seeds",
            [](RunConfig& c, const std::string& v) {
              c.ablation.seeds = to_list<std::uint64_t>(v, to_u64);
            },
            [](const RunConfig& c) { return join(c.ablation.seeds); }},
      Field{"ablation", "alphas",
            [](RunConfig& c, const std::string& v) {
              c.ablation.alphas = to_list<double>(v, to_double);
            },
            [](const RunConfig& c) { return join(c.ablation.alphas); }},
  };
  return f;
}

#undef AMAA_SIZE
#undef AMAA_U64
#undef AMAA_DOUBLE
#undef AMAA_BOOL

// The scene shares the grid and class count with the camera and the model.
void sync(RunConfig& c) {
  c.scene.extents = c.camera.dims;
  c.model.classes = c.scene.classes;
}

}  // namespace

void RunConfig::validate() const {
  scene.validate();
  camera.validate();
  if (scene.extents != camera.dims) throw ConfigError("scene extents must equal camera.grid");
  if (model.classes != scene.classes) {
    throw ConfigError("model class count must equal scene.classes");
  }
  if (dataset.train < 1 || dataset.val < 1) {
    throw ConfigError("dataset.train and dataset.val must be >= 1");
  }
  model.validate(camera);
  if (!model.loss.class_weights.empty()) model.loss.validate(model.classes);
  train.validate();
  if (ablation.seeds.empty()) throw ConfigError("ablation.seeds must not be empty");
  if (ablation.alphas.empty()) throw ConfigError("ablation.alphas must not be empty");
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  auto fail = [&](const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') fail("malformed section header '" + body + "'");
      section = trim(body.substr(1, body.size() - 2));
      bool known = false;
      for (const auto& f : fields()) known = known || section == f.section;
      if (!known) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) fail("expected 'key = value', got '" + body + "'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (section.empty()) fail("key '" + key + "' appears before any [section]");
    const std::string full = section + "." + key;
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (section == f.section && key == f.key) field = &f;
    }
    if (!field) fail("unknown key '" + full + "'");
    if (!seen.insert(full).second) fail("duplicate key '" + full + "'");
    try {
      field->set(cfg, value);
    } catch (const std::invalid_argument& e) {
      fail("key '" + full + "': " + e.what());
    }
  }
  sync(cfg);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path_or_default) {
  if (path_or_default == "default") return parse_config(default_config_text(), "default");
  const std::filesystem::path path(path_or_default);
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file not found: " + path_or_default);
  }
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(std::string(bytes.begin(), bytes.end()), path_or_default);
}

std::string config_text(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      section = f.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::string default_config_text() {
  RunConfig cfg;
  sync(cfg);
  return config_text(cfg);
}

}  // namespace amaa
