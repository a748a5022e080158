// Copyright 2026 Google LLC
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line entry point: generate, train, eval, report and config.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "sls/io.hpp"
#include "sls/trainer.hpp"

namespace fs = std::filesystem;
using namespace sls;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// Config file plus one flag per key; precedence is CLI > file > default.
struct ConfigSource {
  std::string file;
  std::map<std::string, std::string> flags;
  CLI::App* cmd = nullptr;

  void attach(CLI::App* c) {
    cmd = c;
    cmd->add_option("-c,--config", file, "config file of 'section.key = value' lines");
    for (const io::ConfigKey& k : io::config_keys()) {
      cmd->add_option("--" + k.key, flags[k.key], k.doc)->group("Config keys");
    }
  }

  [[nodiscard]] io::RunConfig resolve() const {
    std::map<std::string, std::string> kv;
    if (!file.empty()) {
      if (!fs::is_regular_file(file)) throw ConfigError("config file not found: " + file);
      kv = io::parse_assignments(io::read_text(file));
    }
    for (const auto& [key, value] : flags) {
      if (cmd->count("--" + key) > 0) kv[key] = value;
    }
    io::RunConfig rc = io::apply_assignments(io::RunConfig{}, kv);
    rc.gen.validate();
    rc.train.validate();
    return rc;
  }
};

std::string step_name(const char* prefix, int step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06d.png", prefix, step);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
}

int cmd_generate(const io::RunConfig& rc, const std::string& out) {
  const SceneDataset data = generate_scene(rc.gen_seed, rc.gen);
  io::save_dataset(out, data, rc);
  std::printf("views=%zu size=%dx%d measured_occupancy=%.4f\n", data.views.size(), data.width(),
              data.height(), data.measured_occupancy());
  return 0;
}

// Loads the dataset directory when given, otherwise regenerates it from the
// gen.* keys. The gen.* keys of `rc` are replaced by the dataset's own.
SceneDataset obtain_dataset(io::RunConfig& rc, const std::string& data_dir) {
  if (data_dir.empty() || data_dir == "generated") return generate_scene(rc.gen_seed, rc.gen);
  SceneDataset data = io::load_dataset(data_dir);
  rc.gen = data.cfg;
  rc.gen_seed = data.seed;
  return data;
}

// Render and mask PNGs of view 0 for one evaluation.
void dump_images(const fs::path& dir, const SceneDataset& data, const TrainConfig& cfg,
                 const EvalRecord& rec, const TrainState& st, const TrainContext& ctx) {
  const SceneView& v0 = data.views.front();
  const RgbImage img = render(st.model, v0.id, data.width(), data.height());
  io::write_png(dir / step_name("render", rec.row.step), img);
  const InlierMask m = eval_mask(st, ctx, cfg, v0.id, residual_image(img, v0.image));
  io::write_png(dir / step_name("mask", rec.row.step), m);
  if (cfg.mode == MaskMode::kSlsAgg && rec.row.step == 0) {
    io::write_cluster_png(dir / "clusters_view0.png", ctx.clusters.front());
  }
}

int cmd_train(io::RunConfig rc, const std::string& data_dir, const std::string& out, bool quiet) {
  const SceneDataset data = obtain_dataset(rc, data_dir);
  const fs::path root(out);
  ensure_dir(root);
  const fs::path images = root / "images";
  if (rc.dump_images) ensure_dir(images);
  io::write_text(root / "config.cfg", io::format_config(rc));
  io::write_text(root / "dataset.txt",
                 (data_dir.empty() ? std::string("generated") : fs::absolute(data_dir).string()) + "\n");

  const auto t0 = std::chrono::steady_clock::now();
  TrainHooks hooks;
  hooks.on_eval = [&](const EvalRecord& rec, const TrainState& st, const TrainContext& ctx) {
    if (!quiet) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("step %5d  psnr %7.3f  loss %.5f  iou %.4f  splats %5d  alpha %.4f  [%.1fs]\n",
                  rec.row.step, rec.row.psnr, rec.row.loss, rec.row.iou, rec.row.splats,
                  rec.row.alpha, secs);
      std::fflush(stdout);
    }
    if (rc.dump_images) dump_images(images, data, rc.train, rec, st, ctx);
  };
  const TrainResult result = train(data, rc.train, hooks);
  io::write_text(root / "log.csv", io::format_log_csv(result.log));
  io::save_checkpoint(root / "checkpoint", result.state);
  const LogRow& last = result.log.rows.back();
  std::printf("final: psnr=%.4f iou=%.4f splats=%d\n", last.psnr, last.iou, last.splats);
  return 0;
}

io::RunConfig read_run_config(const fs::path& run) {
  if (!fs::is_regular_file(run / "config.cfg")) throw DataError("no config.cfg in " + run.string());
  try {
    return io::apply_assignments(io::RunConfig{}, io::parse_assignments(io::read_text(run / "config.cfg")));
  } catch (const ConfigError& e) {
    throw DataError((run / "config.cfg").string() + ": " + e.what());
  }
}

int cmd_eval(const std::string& run_dir, std::string data_dir) {
  const fs::path run(run_dir);
  io::RunConfig rc = read_run_config(run);
  if (data_dir.empty() && fs::is_regular_file(run / "dataset.txt")) {
    data_dir = io::read_text(run / "dataset.txt");
    data_dir.erase(data_dir.find_last_not_of(" \n\r\t") + 1);
  }
  const SceneDataset data = obtain_dataset(rc, data_dir);
  const TrainState st = io::load_checkpoint(run / "checkpoint", data, rc.train);
  const TrainContext ctx = make_context(data, rc.train);
  const EvalRecord rec = evaluate(st, ctx, rc.train);

  TrainLog one;
  one.rows.push_back(rec.row);
  io::write_text(run / "eval.csv", io::format_log_csv(one));
  std::string views = "view,psnr,iou\n";
  for (std::size_t v = 0; v < rec.view_psnr.size(); ++v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", v, rec.view_psnr[v], rec.view_iou[v]);
    views += buf;
  }
  io::write_text(run / "eval_views.csv", views);

  std::printf("%s\n", io::format_log_row(rec.row).c_str());
  std::printf("psnr_identity=%.4f\n", rec.psnr_identity);
  if (fs::is_regular_file(run / "log.csv")) {
    const TrainLog log = io::parse_log_csv(io::read_text(run / "log.csv"));
    if (!log.rows.empty()) {
      std::printf("matches last log row: %s\n", log.rows.back() == rec.row ? "yes" : "no");
    }
  }
  return 0;
}

struct ReportRow {
  std::string preset;
  std::uint64_t gen_seed = 0;
  std::uint64_t train_seed = 0;
  std::string mode;
  LogRow last;
  std::string path;
};

void collect_runs(const fs::path& p, std::vector<fs::path>& out) {
  if (fs::is_regular_file(p / "config.cfg") && fs::is_regular_file(p / "log.csv")) {
    out.push_back(p);
    return;
  }
  if (!fs::is_directory(p)) throw DataError("not a run directory: " + p.string());
  std::vector<fs::path> children;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.is_directory()) children.push_back(e.path());
  }
  std::sort(children.begin(), children.end());
  for (const fs::path& c : children) {
    if (fs::is_regular_file(c / "config.cfg") && fs::is_regular_file(c / "log.csv")) {
      out.push_back(c);
    } else if (fs::is_directory(c)) {
      collect_runs(c, out);
    }
  }
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<fs::path> runs;
  for (const std::string& s : inputs) collect_runs(s, runs);
  if (runs.empty()) throw DataError("no completed runs found");

  std::vector<ReportRow> rows;
  for (const fs::path& r : runs) {
    const io::RunConfig rc = read_run_config(r);
    const TrainLog log = io::parse_log_csv(io::read_text(r / "log.csv"));
    if (log.rows.empty()) throw DataError("empty log in " + r.string());
    rows.push_back({rc.preset, rc.gen_seed, rc.train.seed, mask_mode_name(rc.train.mode),
                    log.rows.back(), r.string()});
  }
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.preset, a.gen_seed, a.train_seed, a.mode, a.path) <
           std::tie(b.preset, b.gen_seed, b.train_seed, b.mode, b.path);
  });

  // Best PSNR within each (preset, seeds) block of runs.
  std::map<std::tuple<std::string, std::uint64_t, std::uint64_t>, double> block_best;
  for (const ReportRow& r : rows) {
    auto key = std::make_tuple(r.preset, r.gen_seed, r.train_seed);
    auto it = block_best.find(key);
    if (it == block_best.end() || r.last.psnr > it->second) block_best[key] = r.last.psnr;
  }
  std::string csv = "preset,gen_seed,train_seed,mode,psnr,iou,splats,best\n";
  for (const ReportRow& r : rows) {
    const bool best = r.last.psnr == block_best[{r.preset, r.gen_seed, r.train_seed}];
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%s,%.4f,%.4f,%d,%s\n", r.preset.c_str(),
                  static_cast<unsigned long long>(r.gen_seed),
                  static_cast<unsigned long long>(r.train_seed), r.mode.c_str(), r.last.psnr,
                  r.last.iou, r.last.splats, best ? "*" : "");
    csv += buf;
  }

  // Mean over seeds per (preset, mode), best mode per preset marked.
  struct Acc {
    double psnr = 0, iou = 0, splats = 0;
    int n = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> means;
  for (const ReportRow& r : rows) {
    Acc& a = means[{r.preset, r.mode}];
    a.psnr += r.last.psnr;
    a.iou += r.last.iou;
    a.splats += r.last.splats;
    ++a.n;
  }
  std::map<std::string, double> preset_best;
  for (const auto& [key, a] : means) {
    const double m = a.psnr / a.n;
    auto it = preset_best.find(key.first);
    if (it == preset_best.end() || m > it->second) preset_best[key.first] = m;
  }
  std::string table = "preset,mode,runs,mean_psnr,mean_iou,mean_splats,best\n";
  for (const auto& [key, a] : means) {
    const double m = a.psnr / a.n;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%.4f,%.4f,%.1f,%s\n", key.first.c_str(), key.second.c_str(),
                  a.n, m, a.iou / a.n, a.splats / a.n, m == preset_best[key.first] ? "*" : "");
    table += buf;
  }

  std::printf("%s\n%s", csv.c_str(), table.c_str());
  if (!out.empty()) {
    io::write_text(out, csv);
    io::write_text(fs::path(out).replace_extension(".summary.csv"), table);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust 2D splat fitting with distractor masking"};
  app.require_subcommand(1);

  ConfigSource gen_src, train_src, config_src;
  std::string gen_out, train_data, train_out, eval_run, eval_data, report_out;
  std::vector<std::string> report_runs;
  bool quiet = false;

  CLI::App* gen = app.add_subcommand("generate", "write a synthetic dataset");
  gen_src.attach(gen);
  gen->add_option("-o,--out", gen_out, "dataset directory")->required();

  CLI::App* tr = app.add_subcommand("train", "fit a model and write log, checkpoint and images");
  train_src.attach(tr);
  tr->add_option("-d,--data", train_data, "dataset directory (default: generate from gen.*)");
  tr->add_option("-o,--out", train_out, "run directory")->required();
  tr->add_flag("-q,--quiet", quiet, "suppress per-evaluation progress");

  CLI::App* ev = app.add_subcommand("eval", "recompute metrics from a run's checkpoint");
  ev->add_option("-r,--run", eval_run, "run directory")->required();
  ev->add_option("-d,--data", eval_data, "dataset directory (default: as recorded by train)");

  CLI::App* rep = app.add_subcommand("report", "join runs into a mode x preset x seed table");
  rep->add_option("runs", report_runs, "run directories or parents of run directories")->required();
  rep->add_option("-o,--out", report_out, "also write the table to this CSV file");

  CLI::App* cfg = app.add_subcommand("config", "print the resolved configuration");
  config_src.attach(cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(gen_src.resolve(), gen_out);
    if (*tr) return cmd_train(train_src.resolve(), train_data, train_out, quiet);
    if (*ev) return cmd_eval(eval_run, eval_data);
    if (*rep) return cmd_report(report_runs, report_out);
    if (*cfg) {
      std::printf("%s", io::format_config(config_src.resolve()).c_str());
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical divergence: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
