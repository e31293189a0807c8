#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "amaa/byte_io.hpp"
#include "amaa/dataset.hpp"
#include "amaa/grad_suite.hpp"
#include "amaa/rng.hpp"
#include "amaa/scene.hpp"
#include "amaa/volume_file.hpp"
#include "helpers.hpp"

using namespace amaa;
namespace fs = std::filesystem;

namespace {

struct Box {
  std::uint16_t cls;
  std::size_t d0, h0, w0, sd, sh, sw;
  bool contains(std::size_t d, std::size_t h, std::size_t w) const {
    return d >= d0 && d < d0 + sd && h >= h0 && h < h0 + sh && w >= w0 && w < w0 + sw;
  }
};

// Replays the placement stream into a box list, then labels each voxel by
// the last box containing it, falling back to the fixed structure.
std::map<std::uint16_t, std::size_t> replay_histogram(const SceneSpec& s, std::uint64_t seed) {
  const GridDims g = s.extents;
  SplitMix64 rng(seed);
  std::vector<Box> boxes;
  const std::size_t k = s.objects_min + rng.below(s.objects_max - s.objects_min + 1);
  for (std::size_t i = 0; i < k; ++i) {
    Box b{};
    b.cls = static_cast<std::uint16_t>(s.classes > 3 ? 3 + rng.below(s.classes - 3)
                                                     : 1 + rng.below(s.classes - 1));
    const std::size_t span = s.object_size_max - s.object_size_min + 1;
    b.sd = std::min(s.object_size_min + rng.below(span), g.depth - 1);
    b.sh = std::min(s.object_size_min + rng.below(span), g.height - 1);
    b.sw = std::min(s.object_size_min + rng.below(span), g.width - 1);
    b.d0 = rng.below(g.depth - 1 - b.sd + 1);
    b.w0 = 1 + rng.below(g.width - 1 - b.sw + 1);
    b.h0 = g.height - 1 - b.sh;
    boxes.push_back(b);
  }
  std::map<std::uint16_t, std::size_t> hist;
  for (std::size_t d = 0; d < g.depth; ++d) {
    for (std::size_t h = 0; h < g.height; ++h) {
      for (std::size_t w = 0; w < g.width; ++w) {
        std::uint16_t c = 0;
        if (h == g.height - 1) {
          c = 1;
        } else if (d == g.depth - 1 || w == 0) {
          c = static_cast<std::uint16_t>(std::min<std::size_t>(2, s.classes - 1));
        }
        for (auto it = boxes.rbegin(); it != boxes.rend(); ++it) {
          if (it->contains(d, h, w)) {
            c = it->cls;
            break;
          }
        }
        ++hist[c];
      }
    }
  }
  return hist;
}

std::map<std::uint16_t, std::size_t> histogram(const LabelVolume& l) {
  std::map<std::uint16_t, std::size_t> h;
  for (auto id : l.ids) ++h[id];
  return h;
}

// Entry depth of the pixel ray into voxel (d, h, w) by slab intersection,
// or +inf on a miss. Assumes the identity pose.
double ray_box_entry(const CameraGrid& g, std::size_t row, std::size_t col, std::size_t d,
                     std::size_t h, std::size_t w) {
  const double dir[3] = {(static_cast<double>(col) - g.cx) / g.fx,
                         (static_cast<double>(row) - g.cy) / g.fy, 1.0};
  const double idx[3] = {static_cast<double>(w), static_cast<double>(h),
                         static_cast<double>(d)};
  double t_in = 0.0, t_out = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double lo = g.origin[a] + g.voxel_size * idx[a];
    const double hi = lo + g.voxel_size;
    if (dir[a] == 0.0) {
      if (lo > 0.0 || hi < 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    const double t0 = std::min(lo / dir[a], hi / dir[a]);
    const double t1 = std::max(lo / dir[a], hi / dir[a]);
    t_in = std::max(t_in, t0);
    t_out = std::min(t_out, t1);
  }
  return t_in < t_out ? t_in : std::numeric_limits<double>::infinity();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("amaa_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("scene_harness") {

TEST_CASE("no objects leaves floor and walls") {
  SceneSpec s;
  s.objects_min = s.objects_max = 0;
  const GridDims g = s.extents;
  const LabelVolume l = generate_scene(s, 9);
  const auto h = histogram(l);
  CHECK(h.at(1) == g.depth * g.width);
  CHECK(h.at(2) == (g.height - 1) * (g.width + g.depth - 1));
  CHECK(h.at(0) == g.count() - h.at(1) - h.at(2));
  CHECK(h.size() == 3);
}

TEST_CASE("scenes are deterministic and match a replay of the placement stream") {
  SceneSpec s;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const LabelVolume a = generate_scene(s, seed);
    CHECK(a.ids == generate_scene(s, seed).ids);
    CHECK(histogram(a) == replay_histogram(s, seed));
    CHECK(std::count(a.ids.begin(), a.ids.end(), 0) > 0);
  }
  s.classes = 3;
  s.objects_min = 4;
  s.object_size_max = 20;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CHECK(histogram(generate_scene(s, seed)) == replay_histogram(s, seed));
  }
}

TEST_CASE("scene parameter validation") {
  SceneSpec s;
  s.classes = 1;
  CHECK_THROWS_AS(generate_scene(s, 1), ConfigError);
  s = SceneSpec{};
  s.extents = {1, 12, 16};
  CHECK_THROWS_AS(generate_scene(s, 1), ConfigError);
  s = SceneSpec{};
  s.objects_min = 6;
  CHECK_THROWS_AS(generate_scene(s, 1), ConfigError);
}

TEST_CASE("palette is injective") {
  const auto p = make_palette(60);
  std::set<Rgb> seen(p.begin(), p.end());
  CHECK(seen.size() == p.size());
  CHECK(p[0] == Rgb{0.0, 0.0, 0.0});
}

TEST_CASE("rendering an empty volume gives black") {
  const CameraGrid g;
  const Tensor img = render_rgb(LabelVolume(g.dims), g, make_palette(5));
  for (double v : img.values()) CHECK(v == 0.0);
}

TEST_CASE("a voxel on the optical axis lights the principal pixel") {
  CameraGrid g = micro_grid();
  g.cx = g.cy = 4.0;
  g.image_rows = g.image_cols = 9;
  LabelVolume l(g.dims);
  l.at(1, 2, 2) = 3;  // spans x, y in [0, 0.16]; axis passes its corner edge
  g.origin = {-0.40, -0.40, 0.5};  // now x, y in [-0.08, 0.08]
  const Tensor img = render_rgb(l, g, make_palette(5));
  const double z = 0.5 + 0.16;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    CHECK(img.px(ch, 4, 4) == doctest::Approx(class_color(3)[ch] / (1.0 + z)).epsilon(1e-12));
  }
  CHECK(img.px(0, 0, 0) == 0.0);
}

TEST_CASE("first-hit depth matches exhaustive ray-box intersection") {
  // Off-lattice principal point: no pixel ray passes exactly through a voxel
  // edge, where first-hit is ambiguous.
  CameraGrid g = micro_grid();
  g.cx += 0.0123;
  g.cy -= 0.0071;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SplitMix64 rng(seed);
    LabelVolume l(g.dims);
    for (auto& id : l.ids) id = rng.uniform() < 0.2 ? static_cast<std::uint16_t>(1 + rng.below(4)) : 0;
    const Tensor img = render_rgb(l, g, make_palette(5));
    for (std::size_t r = 0; r < g.image_rows; ++r) {
      for (std::size_t c = 0; c < g.image_cols; ++c) {
        double best = std::numeric_limits<double>::infinity();
        std::uint16_t cls = 0;
        for (std::size_t d = 0; d < 4; ++d) {
          for (std::size_t h = 0; h < 4; ++h) {
            for (std::size_t w = 0; w < 4; ++w) {
              if (l.at(d, h, w) == 0) continue;
              const double t = ray_box_entry(g, r, c, d, h, w);
              if (t < best) {
                best = t;
                cls = l.at(d, h, w);
              }
            }
          }
        }
        const RayHit hit = cast_ray(l, g, r, c);
        REQUIRE(hit.hit == std::isfinite(best));
        if (!hit.hit) {
          CHECK(img.px(0, r, c) == 0.0);
          continue;
        }
        CHECK(hit.depth == doctest::Approx(best).epsilon(1e-12));
        CHECK(img.px(0, r, c) ==
              doctest::Approx(class_color(cls)[0] / (1.0 + best)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("flip mirrors columns and is an involution") {
  SplitMix64 rng(131);
  const Tensor img = testing::random_tensor(rng, {3, 2, 5});
  const Tensor f = flip_image(img);
  CHECK(f.px(1, 1, 0) == img.px(1, 1, 4));
  CHECK(std::ranges::equal(flip_image(f).values(), img.values()));
  CHECK(flip_is_consistent(CameraGrid{}));
  CameraGrid shifted;
  shifted.cx += 1.0;
  CHECK_FALSE(flip_is_consistent(shifted));
}

TEST_CASE("default scenes contain occluded occupied voxels") {
  const CameraGrid g;
  const SceneSpec s;
  const LabelVolume l = generate_scene(s, scene_seeds(42, 1, 0)[0]);
  std::size_t occluded_rays = 0;
  for (std::size_t r = 0; r < g.image_rows && occluded_rays == 0; r += 3) {
    for (std::size_t c = 0; c < g.image_cols && occluded_rays == 0; c += 3) {
      std::size_t crossed = 0;
      for (std::size_t d = 0; d < g.dims.depth; ++d) {
        for (std::size_t h = 0; h < g.dims.height; ++h) {
          for (std::size_t w = 0; w < g.dims.width; ++w) {
            if (l.at(d, h, w) != 0 && std::isfinite(ray_box_entry(g, r, c, d, h, w))) ++crossed;
          }
        }
      }
      if (crossed >= 2) ++occluded_rays;
    }
  }
  CHECK(occluded_rays > 0);
}

TEST_CASE("volume file byte layout of a 1x1x1x2 volume") {
  const Tensor v({1, 1, 1, 2}, std::vector<double>{1.0, 2.0});
  const std::vector<std::uint8_t> expected = {
      'V',  'V',  'O',  'X',  '1',                          // magic
      0x01, 0x00,                                           // version, dtype f64
      0x01, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00,       // C, D
      0x01, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00,       // H, W
      0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xF0, 0x3F,       // 1.0
      0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x40,       // 2.0
      0x5F, 0x89, 0xA3, 0x7B,                               // CRC32 of payload
  };
  CHECK(encode_volume(v) == expected);
  CHECK(std::ranges::equal(decode_volume(expected).values(), v.values()));
}

TEST_CASE("volume files round-trip bit-exactly") {
  SplitMix64 rng(132);
  const Tensor v = testing::random_tensor(rng, {2, 3, 4, 5}, -1e6, 1e6);
  const fs::path dir = fresh_dir("vvox");
  save_volume(dir / "v.vvox", v);
  const Tensor back = load_volume(dir / "v.vvox");
  CHECK(back.shape() == v.shape());
  CHECK(std::ranges::equal(back.values(), v.values()));

  const LabelVolume l = testing::random_labels(rng, 7, {3, 4, 5});
  save_labels(dir / "l.vvox", l);
  CHECK(load_labels(dir / "l.vvox").ids == l.ids);

  const Tensor img = testing::random_tensor(rng, {3, 4, 6});
  save_image(dir / "i.vvox", img);
  CHECK(std::ranges::equal(load_image(dir / "i.vvox").values(), img.values()));
  CHECK_THROWS_AS(load_volume(dir / "l.vvox"), CorruptFileError);
  CHECK_THROWS(load_volume(dir / "missing.vvox"));
}

TEST_CASE("corrupt volume files are rejected") {
  const Tensor v({1, 1, 1, 2}, std::vector<double>{1.0, 2.0});
  const auto good = encode_volume(v);
  auto bad = good;
  bad.pop_back();
  CHECK_THROWS_AS(decode_volume(bad), CorruptFileError);
  bad = good;
  bad.resize(30);
  CHECK_THROWS_AS(decode_volume(bad), CorruptFileError);
  bad = good;
  bad[0] = 'W';
  CHECK_THROWS_AS(decode_volume(bad), CorruptFileError);
  bad = good;
  bad[5] = 2;
  CHECK_THROWS_AS(decode_volume(bad), CorruptFileError);
  bad = good;
  bad[30] ^= 0x01;
  CHECK_THROWS_AS(decode_volume(bad), CorruptFileError);
  bad = good;
  bad.push_back(0);
  CHECK_THROWS_AS(decode_volume(bad), CorruptFileError);
}

TEST_CASE("dataset generation writes the manifest and is reproducible") {
  SceneSpec s;
  CameraGrid g = micro_grid();
  s.extents = g.dims;
  s.objects_max = 2;
  const fs::path a = fresh_dir("ds_a"), b = fresh_dir("ds_b");
  const DatasetManifest m = make_dataset(s, g, 2, 1, 7, a);
  CHECK(m.train.size() == 2);
  CHECK(m.val.size() == 1);
  std::set<fs::path> listed{"manifest.json"};
  for (const auto* split : {&m.train, &m.val}) {
    for (const auto& e : *split) {
      listed.insert(e.rgb);
      listed.insert(e.labels);
    }
  }
  std::set<fs::path> on_disk;
  for (const auto& f : fs::directory_iterator(a)) on_disk.insert(f.path().filename());
  CHECK(on_disk == listed);

  make_dataset(s, g, 2, 1, 7, b);
  for (const auto& f : listed) CHECK(file_bytes(a / f) == file_bytes(b / f));

  const DatasetManifest loaded = load_manifest(a / "manifest.json");
  CHECK(loaded.train == m.train);
  CHECK(loaded.val == m.val);
  const auto samples = load_split(loaded, loaded.val);
  const SceneSample direct = make_sample(s, g, m.val[0].seed);
  CHECK(samples[0].labels.ids == direct.labels.ids);
  CHECK(std::ranges::equal(samples[0].rgb.values(), direct.rgb.values()));

  CHECK_THROWS_AS(make_dataset(s, g, 0, 1, 7, b), ConfigError);
}

TEST_CASE("train and val seeds are disjoint") {
  for (std::uint64_t seed : {0ULL, 7ULL, 42ULL, 0xFFFFFFFFFFFFFFFFULL}) {
    const auto seeds = scene_seeds(seed, 50, 20);
    std::set<std::uint64_t> train(seeds.begin(), seeds.begin() + 50);
    for (std::size_t j = 50; j < seeds.size(); ++j) CHECK(train.count(seeds[j]) == 0);
    CHECK(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size());
  }
}

}  // TEST_SUITE
