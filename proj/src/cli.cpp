#include "amaa/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <optional>

#include "amaa/byte_io.hpp"
#include "amaa/config.hpp"
#include "amaa/dataset.hpp"
#include "amaa/grad_suite.hpp"
#include "amaa/train.hpp"
#include "amaa/volume_file.hpp"

namespace amaa {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const fs::path& path, const ojson& j) { write_text_atomic(path, j.dump(2) + "\n"); }

ojson metrics_obj(const MetricsReport& r) { return ojson::parse(metrics_json(r)); }

ojson epochs_obj(const std::vector<EpochLog>& log) {
  ojson a = ojson::array();
  for (const auto& e : log) {
    a.push_back({{"epoch", e.epoch},
                 {"lr", e.lr},
                 {"loss",
                  {{"ce", e.loss.ce},
                   {"affinity", e.loss.affinity},
                   {"consistency", e.loss.consistency},
                   {"total", e.loss.total}}},
                 {"val", metrics_obj(e.val)}});
  }
  return a;
}

struct Globals {
  std::string config = "default";
  std::optional<std::uint64_t> seed;
  std::string out;
  bool print_default = false;
};

struct Context {
  RunConfig cfg;
  fs::path out;
  std::ostream& log;  // diagnostics
  std::ostream& res;  // summary lines
};

// Loaded or in-memory splits matching the config's grid and image size.
struct Splits {
  std::vector<SceneSample> train;
  std::vector<SceneSample> val;
  std::string source;
};

void check_sample(const SceneSample& s, const RunConfig& cfg, const std::string& where) {
  const Shape want{3, cfg.camera.image_rows, cfg.camera.image_cols};
  if (s.rgb.shape() != want || !(s.labels.dims == cfg.camera.dims)) {
    throw ConfigError(where + ": scene size does not match the configured camera and grid");
  }
  for (auto id : s.labels.ids) {
    if (id >= cfg.scene.classes) {
      throw ConfigError(where + ": label " + std::to_string(id) + " exceeds scene.classes");
    }
  }
}

Splits load_splits(const Context& ctx, const std::string& data) {
  Splits s;
  if (data.empty()) {
    const auto seeds = scene_seeds(ctx.cfg.dataset.seed, ctx.cfg.dataset.train, ctx.cfg.dataset.val);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      auto sample = make_sample(ctx.cfg.scene, ctx.cfg.camera, seeds[i]);
      (i < ctx.cfg.dataset.train ? s.train : s.val).push_back(std::move(sample));
    }
    s.source = "generated:seed=" + std::to_string(ctx.cfg.dataset.seed);
    return s;
  }
  if (!fs::is_regular_file(data)) throw ConfigError("dataset manifest not found: " + data);
  const DatasetManifest m = load_manifest(data);
  s.train = load_split(m, m.train);
  s.val = load_split(m, m.val);
  if (s.train.empty() || s.val.empty()) throw ConfigError(data + ": empty train or val split");
  for (const auto& x : s.train) check_sample(x, ctx.cfg, data);
  for (const auto& x : s.val) check_sample(x, ctx.cfg, data);
  s.source = data;
  return s;
}

// One directory per training run: params.bin, log.csv, summary.json and
// run_manifest.json (the only file carrying timestamps).
void write_run(const fs::path& dir, const std::string& command, const RunSpec& spec,
               const RunConfig& cfg, const TrainResult& r, const std::string& data,
               const std::string& started) {
  fs::create_directories(dir);
  r.params.save(dir / "params.bin");
  const std::size_t classes = spec.model.classes;
  write_text_atomic(dir / "log.csv", epoch_log_csv(r.log, classes));

  ojson summary;
  summary["run"] = spec.name;
  summary["method"] = spec.method;
  summary["seed"] = spec.seed;
  summary["classes"] = classes;
  summary["class_weights"] = r.class_weights;
  summary["final"] = metrics_obj(r.log.back().val);
  summary["epochs"] = epochs_obj(r.log);
  write_json(dir / "summary.json", summary);

  RunConfig snapshot = cfg;
  snapshot.model = spec.model;
  snapshot.train = spec.train;
  ojson m;
  m["tool"] = "amaa";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["seed"] = {{"model", spec.model.seed}, {"train", spec.train.seed}};
  m["data"] = data;
  m["started_at"] = started;
  m["finished_at"] = utc_now();
  m["config"] = config_text(snapshot);
  m["artifacts"] = {{"params", "params.bin"}, {"log", "log.csv"}, {"summary", "summary.json"}};
  write_json(dir / "run_manifest.json", m);
}

EpochCallback progress(std::ostream& log, const std::string& run, std::size_t epochs) {
  return [&log, run, epochs](const EpochLog& e) {
    log << run << ": epoch " << e.epoch << "/" << epochs << " loss=" << format_double(e.loss.total)
        << " val_miou=" << format_double(e.val.miou) << " val_sc_iou=" << format_double(e.val.sc_iou)
        << "\n";
  };
}

int cmd_gen_scenes(const Context& ctx) {
  const fs::path dir = ctx.out / "dataset";
  const auto& d = ctx.cfg.dataset;
  make_dataset(ctx.cfg.scene, ctx.cfg.camera, d.train, d.val, d.seed, dir);
  ctx.res << "gen-scenes: " << d.train << " train + " << d.val << " val scenes -> "
          << (dir / "manifest.json").string() << "\n";
  return 0;
}

int cmd_train(const Context& ctx, const std::string& data, const std::string& name) {
  const std::string started = utc_now();
  const Splits s = load_splits(ctx, data);
  const Model model(ctx.cfg.model, ctx.cfg.camera);
  const TrainResult r = train(model, s.train, s.val, ctx.cfg.train,
                              progress(ctx.log, name, ctx.cfg.train.epochs));
  const RunSpec spec{name, name, ctx.cfg.train.seed, ctx.cfg.model, ctx.cfg.train};
  const fs::path dir = ctx.out / "runs" / name;
  write_run(dir, "train", spec, ctx.cfg, r, s.source, started);
  const auto& v = r.log.back().val;
  ctx.res << "train: " << dir.string() << " epochs=" << r.log.size()
          << " val_sc_iou=" << format_double(v.sc_iou) << " val_miou=" << format_double(v.miou)
          << "\n";
  return 0;
}

int cmd_eval(const Context& ctx, const std::string& data, const std::string& params_path,
             const std::string& split) {
  if (!fs::is_regular_file(params_path)) throw ConfigError("params file not found: " + params_path);
  if (split != "train" && split != "val") throw ConfigError("--split must be train or val");
  const Splits s = load_splits(ctx, data);
  const Model model(ctx.cfg.model, ctx.cfg.camera);
  const ParamStore params = ParamStore::load(params_path);
  const ParamStore expected = model.init_params();
  for (const auto& [n, p] : expected) {
    if (!params.contains(n) || params.at(n).value.shape() != p.value.shape()) {
      throw ConfigError(params_path + ": parameter '" + n + "' missing or mis-shaped for this model");
    }
  }
  const MetricsReport r = evaluate(model, params, split == "val" ? s.val : s.train);
  const fs::path dir = ctx.out / "eval";
  fs::create_directories(dir);
  ojson j;
  j["params"] = params_path;
  j["data"] = s.source;
  j["split"] = split;
  j["metrics"] = metrics_obj(r);
  write_json(dir / "metrics.json", j);
  ctx.res << "eval: " << split << " sc_iou=" << format_double(r.sc_iou)
          << " miou=" << format_double(r.miou) << " precision=" << format_double(r.precision)
          << " recall=" << format_double(r.recall) << "\n";
  return 0;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_ablate(const Context& ctx, const std::string& data) {
  const Splits s = load_splits(ctx, data);
  const fs::path dir = ctx.out / "ablation";
  const auto rows = run_ablation(
      ctx.cfg.model, ctx.cfg.camera, s.train, s.val, ctx.cfg.train, ctx.cfg.ablation.seeds,
      [&](const RunSpec& spec, const TrainResult& r) {
        const auto& v = r.log.back().val;
        ctx.log << "ablate: " << spec.name << " val_miou=" << format_double(v.miou) << "\n";
        write_run(dir / "runs" / spec.name, "ablate", spec, ctx.cfg, r, s.source, utc_now());
      });
  write_text_atomic(dir / "ablation.csv", ablation_csv(rows));
  ojson j;
  j["data"] = s.source;
  j["seeds"] = ctx.cfg.ablation.seeds;
  j["rows"] = ojson::array();
  std::map<char, std::vector<double>> by_variant;
  for (const auto& r : rows) {
    j["rows"].push_back({{"variant", std::string(1, r.variant)},
                         {"seed", r.seed},
                         {"run", std::string(1, r.variant) + "_seed" + std::to_string(r.seed)},
                         {"metrics", metrics_obj(r.report)}});
    by_variant[r.variant].push_back(r.report.miou);
  }
  std::string line = "ablate: median val_miou";
  for (const auto& [v, m] : by_variant) {
    j["median_miou"][std::string(1, v)] = median(m);
    line += " " + std::string(1, v) + "=" + format_double(median(m));
  }
  write_json(dir / "ablation.json", j);
  ctx.res << line << "\n";
  return 0;
}

int cmd_sweep(const Context& ctx, const std::string& data) {
  const Splits s = load_splits(ctx, data);
  const fs::path dir = ctx.out / "sweep";
  const auto rows = sweep_alpha(
      ctx.cfg.model, ctx.cfg.camera, s.train, s.val, ctx.cfg.train, ctx.cfg.ablation.alphas,
      [&](const RunSpec& spec, const TrainResult& r) {
        ctx.log << "sweep-alpha: " << spec.name
                << " val_miou=" << format_double(r.log.back().val.miou) << "\n";
        write_run(dir / "runs" / spec.name, "sweep-alpha", spec, ctx.cfg, r, s.source, utc_now());
      });
  write_text_atomic(dir / "sweep.csv", sweep_csv(rows));
  ojson j;
  j["data"] = s.source;
  j["chosen_default_alpha"] = kChosenAlpha;
  j["rows"] = ojson::array();
  const SweepRow* best = &rows.front();
  for (const auto& r : rows) {
    j["rows"].push_back({{"alpha", r.alpha},
                         {"run", "alpha_" + format_alpha(r.alpha)},
                         {"metrics", metrics_obj(r.report)}});
    if (r.report.miou > best->report.miou) best = &r;
  }
  j["best_alpha"] = best->alpha;
  write_json(dir / "sweep.json", j);
  ctx.res << "sweep-alpha: " << rows.size() << " runs, best alpha=" << format_alpha(best->alpha)
          << " val_miou=" << format_double(best->report.miou) << " (default "
          << format_alpha(kChosenAlpha) << ")\n";
  return 0;
}

int cmd_gradcheck(const Context& ctx, std::size_t n_seeds, std::uint64_t first_seed) {
  if (n_seeds < 1) throw ConfigError("--seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(first_seed + i);
  const GradCheckOptions opts;
  const auto results = run_grad_suite(seeds, opts);
  ojson j;
  j["h"] = opts.step;
  j["tolerance"] = opts.tolerance;
  j["seeds"] = seeds;
  j["modules"] = ojson::array();
  bool ok = true;
  for (const auto& r : results) {
    ctx.res << r.module << " max_rel_error=" << format_double(r.worst())
            << (r.passed() ? " ok" : " FAIL") << "\n";
    j["modules"].push_back({{"module", r.module},
                            {"max_rel_error", r.max_rel_error},
                            {"worst", r.worst()},
                            {"passed", r.passed()}});
    ok = ok && r.passed();
  }
  j["passed"] = ok;
  fs::create_directories(ctx.out);
  write_json(ctx.out / "gradcheck.json", j);
  ctx.res << "gradcheck: " << (ok ? "all modules within " : "some modules exceed ")
          << format_double(opts.tolerance) << "\n";
  return ok ? 0 : 2;
}

ojson read_json(const fs::path& p) {
  const auto bytes = read_file(p);
  try {
    return ojson::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

int cmd_export_plots(const Context& ctx, const std::string& from) {
  std::vector<fs::path> summaries;
  if (fs::is_regular_file(fs::path(from) / "summary.json")) {
    summaries.push_back(fs::path(from) / "summary.json");
  } else if (fs::is_directory(fs::path(from) / "runs")) {
    for (const auto& e : fs::directory_iterator(fs::path(from) / "runs")) {
      if (fs::is_regular_file(e.path() / "summary.json")) summaries.push_back(e.path() / "summary.json");
    }
    std::sort(summaries.begin(), summaries.end());
  }
  if (summaries.empty()) throw ConfigError("no run logs (summary.json) found under " + from);

  const fs::path dir = ctx.out / "plots";
  fs::create_directories(dir);
  std::string categories = "method,category,seed,iou\n";
  for (const auto& path : summaries) {
    const ojson s = read_json(path);
    try {
      const std::string method = s.at("method").get<std::string>();
      const std::string seed = std::to_string(s.at("seed").get<std::uint64_t>());
      const auto& ious = s.at("final").at("class_iou");
      for (std::size_t k = 0; k < ious.size(); ++k) {
        categories += method + ",class_" + std::to_string(k + 1) + "," + seed + "," +
                      format_double(ious[k].get<double>()) + "\n";
      }
      std::string loss = "epoch,ce,affinity,consistency,total\n";
      for (const auto& e : s.at("epochs")) {
        const auto& l = e.at("loss");
        loss += std::to_string(e.at("epoch").get<std::size_t>()) + "," +
                format_double(l.at("ce").get<double>()) + "," +
                format_double(l.at("affinity").get<double>()) + "," +
                format_double(l.at("consistency").get<double>()) + "," +
                format_double(l.at("total").get<double>()) + "\n";
      }
      const std::string name = summaries.size() == 1
                                   ? "loss.csv"
                                   : "loss_" + s.at("run").get<std::string>() + ".csv";
      write_text_atomic(dir / name, loss);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ": malformed run log: " + e.what());
    }
  }
  write_text_atomic(dir / "categories.csv", categories);
  ctx.res << "export-plots: " << summaries.size() << " run(s) -> " << dir.string() << "\n";
  return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention-aggregated voxel scene completion at desk scale", "amaa"};
  Globals g;
  app.add_option("--config", g.config, "config file, or 'default' for the built-in values");
  app.add_option("--seed", g.seed, "overrides model and train seeds (dataset seed for gen-scenes)");
  app.add_option("--out", g.out, "output directory (default $AMAA_OUT, else ./amaa_out)");
  app.add_flag("--print-default-config", g.print_default, "print the default config and exit");
  app.require_subcommand(0, 1);

  std::string data, name = "train", params_path, split = "val", from;
  std::size_t grad_seeds = 5;
  auto* gen = app.add_subcommand("gen-scenes", "render the synthetic dataset to <out>/dataset");
  auto* tr = app.add_subcommand("train", "train one model into <out>/runs/<name>");
  tr->add_option("--data", data, "dataset manifest.json (default: generate in memory)");
  tr->add_option("--name", name, "run name");
  auto* ev = app.add_subcommand("eval", "evaluate a parameter file");
  ev->add_option("--data", data, "dataset manifest.json (default: generate in memory)");
  ev->add_option("--params", params_path, "params.bin from a run")->required();
  ev->add_option("--split", split, "train or val");
  auto* ab = app.add_subcommand("ablate", "variants A-D over the ablation seeds");
  ab->add_option("--data", data, "dataset manifest.json (default: generate in memory)");
  auto* sw = app.add_subcommand("sweep-alpha", "one run per injection coefficient");
  sw->add_option("--data", data, "dataset manifest.json (default: generate in memory)");
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every module");
  gc->add_option("--seeds", grad_seeds, "number of random seeds");
  auto* ex = app.add_subcommand("export-plots", "CSV plot data from a run or ablation/sweep dir");
  ex->add_option("--from", from, "run directory, or a directory with runs/")->required();
  for (auto* sub : {gen, tr, ev, ab, sw, gc, ex}) sub->fallthrough();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  if (g.print_default) {
    out << default_config_text();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    err << "error: a subcommand is required\n" << app.help();
    return 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    RunConfig cfg = load_config(g.config);
    if (g.seed) {
      if (command == "gen-scenes") {
        cfg.dataset.seed = *g.seed;
      } else {
        cfg.model.seed = *g.seed;
        cfg.train.seed = *g.seed;
        cfg.ablation.seeds = {*g.seed};
      }
    }
    if (g.out.empty()) {
      const char* env = std::getenv("AMAA_OUT");
      g.out = env && *env ? env : "amaa_out";
    }
    const Context ctx{cfg, g.out, err, out};
    if (command == "gen-scenes") return cmd_gen_scenes(ctx);
    if (command == "train") return cmd_train(ctx, data, name);
    if (command == "eval") return cmd_eval(ctx, data, params_path, split);
    if (command == "ablate") return cmd_ablate(ctx, data);
    if (command == "sweep-alpha") return cmd_sweep(ctx, data);
    if (command == "gradcheck") return cmd_gradcheck(ctx, grad_seeds, g.seed.value_or(1));
    return cmd_export_plots(ctx, from);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int cli_dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace amaa
