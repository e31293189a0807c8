#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "amaa/cli.hpp"
#include "amaa/config.hpp"
#include "amaa/metrics.hpp"

using namespace amaa;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"([scene]
classes = 3
object_size_max = 2

[camera]
fx = 8
fy = 8
cx = 3.5
cy = 3.5
image_rows = 8
image_cols = 8
origin = -0.32, -0.32, 0.5
voxel_size = 0.16
grid = 4, 4, 4

[dataset]
train = 3
val = 2
seed = 5

[model]
widths_2d = 2, 3
lambda_c = 0.1

[train]
lr = 0.01
epochs = 2

[ablation]
seeds = 1, 2, 3
)";

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workspace(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("amaa_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  std::ofstream(p / "tiny.cfg") << kTinyConfig;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("amaa_cli") {

TEST_CASE("config text round-trips and defaults validate") {
  const RunConfig d = load_config("default");
  d.validate();
  CHECK(config_text(parse_config(config_text(d))) == config_text(d));
  CHECK(default_config_text() == config_text(d));
  const RunConfig tiny = parse_config(kTinyConfig);
  CHECK(tiny.camera.dims == GridDims{4, 4, 4});
  CHECK(tiny.scene.extents == tiny.camera.dims);
  CHECK(tiny.model.classes == 3);
  CHECK(config_text(parse_config(config_text(tiny))) == config_text(tiny));
}

TEST_CASE("config errors name the key and line") {
  try {
    parse_config("[model]\nalpha = 0.5\nalpah = 1\n", "x.cfg");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("x.cfg:3") != std::string::npos);
    CHECK(msg.find("alpah") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("[nosuch]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nlr = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[train]\nlr = 1\nlr = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("lr = 1\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/missing.cfg"), ConfigError);
}

TEST_CASE("usage errors and help") {
  CHECK(run({}).code == 1);
  CHECK(run({"bogus"}).code == 1);
  CHECK(run({"train", "--no-such-flag"}).code == 1);
  const Run help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("sweep-alpha") != std::string::npos);
  const Run dflt = run({"--print-default-config"});
  CHECK(dflt.code == 0);
  CHECK(dflt.out == default_config_text());
}

TEST_CASE("missing or malformed config exits with 1") {
  const fs::path w = workspace("badcfg");
  const Run missing = run({"--config", "missing.cfg", "--out", w.string(), "train"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("not found") != std::string::npos);
  std::ofstream(w / "bad.cfg") << "[model]\nalpah = 1\n";
  const Run bad = run({"--config", (w / "bad.cfg").string(), "--out", w.string(), "train"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find(":2") != std::string::npos);
  CHECK(bad.err.find("alpah") != std::string::npos);
  CHECK_FALSE(fs::exists(w / "runs"));
}

TEST_CASE("gen-scenes, train, eval and export-plots") {
  const fs::path w = workspace("flow");
  const std::string cfg = (w / "tiny.cfg").string(), out = (w / "out").string();
  const Run gen = run({"--config", cfg, "--out", out, "gen-scenes"});
  REQUIRE(gen.code == 0);
  const std::string manifest = (w / "out" / "dataset" / "manifest.json").string();
  CHECK(fs::exists(manifest));

  const Run tr = run({"--config", cfg, "--out", out, "--seed", "4", "train", "--data", manifest,
                      "--name", "r1"});
  REQUIRE(tr.code == 0);
  CHECK(lines(tr.out).size() == 1);
  const fs::path rd = w / "out" / "runs" / "r1";
  for (const char* f : {"params.bin", "log.csv", "summary.json", "run_manifest.json"}) {
    CHECK(fs::exists(rd / f));
  }
  const auto man = nlohmann::json::parse(slurp(rd / "run_manifest.json"));
  CHECK(man.at("seed").at("model") == 4);
  CHECK(man.at("version") == kToolVersion);
  // The snapshot reproduces the run's configuration.
  CHECK(parse_config(man.at("config").get<std::string>()).model.seed == 4);

  const Run ev = run({"--config", cfg, "--out", out, "eval", "--data", manifest, "--params",
                      (rd / "params.bin").string()});
  REQUIRE(ev.code == 0);
  const auto metrics = nlohmann::json::parse(slurp(w / "out" / "eval" / "metrics.json"));
  const auto summary = nlohmann::json::parse(slurp(rd / "summary.json"));
  CHECK(metrics.at("metrics").at("miou") == summary.at("final").at("miou"));

  CHECK(run({"--config", cfg, "--out", out, "eval", "--params", "nope.bin"}).code == 1);

  const Run ex = run({"--out", out, "export-plots", "--from", rd.string()});
  REQUIRE(ex.code == 0);
  const auto loss = lines(slurp(w / "out" / "plots" / "loss.csv"));
  CHECK(loss.front() == "epoch,ce,affinity,consistency,total");
  CHECK(loss.size() == 1 + 2);
  const auto& e2 = summary.at("epochs").at(1).at("loss");
  CHECK(loss[2] == "2," + format_double(e2.at("ce").get<double>()) + "," +
                       format_double(e2.at("affinity").get<double>()) + "," +
                       format_double(e2.at("consistency").get<double>()) + "," +
                       format_double(e2.at("total").get<double>()));
  const auto cats = lines(slurp(w / "out" / "plots" / "categories.csv"));
  CHECK(cats.size() == 1 + 2);
  CHECK(cats[1] == "r1,class_1,4," +
                       format_double(summary.at("final").at("class_iou").at(0).get<double>()));

  CHECK(run({"--out", out, "export-plots", "--from", (w / "empty").string()}).code == 1);
}

TEST_CASE("train is reproducible") {
  const fs::path w = workspace("repro");
  const std::string cfg = (w / "tiny.cfg").string();
  for (const char* o : {"a", "b"}) {
    REQUIRE(run({"--config", cfg, "--out", (w / o).string(), "--seed", "9", "train"}).code == 0);
  }
  for (const char* f : {"params.bin", "log.csv", "summary.json"}) {
    CHECK(slurp(w / "a" / "runs" / "train" / f) == slurp(w / "b" / "runs" / "train" / f));
  }
}

TEST_CASE("ablate and export the category table") {
  const fs::path w = workspace("ablate");
  const std::string out = (w / "out").string();
  const Run ab = run({"--config", (w / "tiny.cfg").string(), "--out", out, "ablate"});
  REQUIRE(ab.code == 0);
  CHECK(ab.out.find("median val_miou") != std::string::npos);
  const auto csv = lines(slurp(w / "out" / "ablation" / "ablation.csv"));
  CHECK(csv.size() == 1 + 4 * 3);
  const auto j = nlohmann::json::parse(slurp(w / "out" / "ablation" / "ablation.json"));
  CHECK(j.at("rows").size() == 12);
  CHECK(j.at("median_miou").size() == 4);

  REQUIRE(run({"--out", out, "export-plots", "--from", (w / "out" / "ablation").string()}).code == 0);
  const auto cats = lines(slurp(w / "out" / "plots" / "categories.csv"));
  CHECK(cats.size() == 1 + 4 * 3 * 2);  // variants x seeds x (C - 1)
  for (const auto& row : j.at("rows")) {
    const std::string prefix = row.at("variant").get<std::string>() + ",class_2," +
                               std::to_string(row.at("seed").get<int>()) + ",";
    const std::string expect =
        prefix + format_double(row.at("metrics").at("class_iou").at(1).get<double>());
    CHECK(std::find(cats.begin(), cats.end(), expect) != cats.end());
  }
  CHECK(fs::exists(w / "out" / "plots" / "loss_D_seed3.csv"));
}

TEST_CASE("sweep-alpha emits the default grid") {
  const fs::path w = workspace("sweep");
  const Run sw = run({"--config", (w / "tiny.cfg").string(), "--out", (w / "out").string(),
                      "sweep-alpha"});
  REQUIRE(sw.code == 0);
  const auto csv = lines(slurp(w / "out" / "sweep" / "sweep.csv"));
  REQUIRE(csv.size() == 7);
  CHECK(csv[0] == "alpha,miou,sc_iou,precision,recall");
  const char* alphas[] = {"0.00", "0.25", "0.50", "0.75", "1.00", "1.25"};
  for (int i = 0; i < 6; ++i) CHECK(csv[i + 1].rfind(std::string(alphas[i]) + ",", 0) == 0);
  const auto j = nlohmann::json::parse(slurp(w / "out" / "sweep" / "sweep.json"));
  CHECK(j.at("chosen_default_alpha") == 0.75);
}

TEST_CASE("gradcheck reports every module") {
  const fs::path w = workspace("grad");
  const Run gc = run({"--out", w.string(), "gradcheck", "--seeds", "1"});
  CHECK(gc.code == 0);
  CHECK(gc.out.find("loss_total_micro_model max_rel_error=") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(w / "gradcheck.json"));
  CHECK(j.at("passed") == true);
  CHECK(run({"--out", w.string(), "gradcheck", "--seeds", "0"}).code == 1);
}

TEST_CASE("outputs stay inside --out") {
  const fs::path w = workspace("confined");
  const std::string out = (w / "out").string();
  REQUIRE(run({"--config", (w / "tiny.cfg").string(), "--out", out, "train"}).code == 0);
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(w)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 2);  // tiny.cfg and out/
}

}  // TEST_SUITE
